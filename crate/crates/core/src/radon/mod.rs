//! Radon and dual Radon transforms for pairs `(M_A, N)` where `N` is an orbit
//! of totally geodesic symplectic submanifolds, plus the classical plane
//! transform on R^3.

pub mod quadrature;
pub mod r3;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ambient::GeneratorClass;
use crate::error::{Error, Result};
use crate::geodesic_sub::{
    self, act_on_submanifold, contains, GeodesicSubmanifold, OrbitInvariants,
};
use crate::group::{self, GroupElement};
use crate::linalg;
use crate::model::{ModelPoint, ModelSpace};
use quadrature::{compensated_sum, gauss_legendre_on};

/// A function on `M_A` with an optional support radius (in the distance used
/// by the registry functions).
pub struct DensityFunction<'a> {
    eval: Box<dyn Fn(&ModelPoint<f64>) -> f64 + Sync + 'a>,
    support_radius: Option<f64>,
}

impl<'a> DensityFunction<'a> {
    pub fn new<F: Fn(&ModelPoint<f64>) -> f64 + Sync + 'a>(
        f: F,
        support_radius: Option<f64>,
    ) -> Self {
        Self {
            eval: Box::new(f),
            support_radius,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, None)
    }

    pub fn eval(&self, p: &ModelPoint<f64>) -> f64 {
        (self.eval)(p)
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    /// The registry function centered at `center`.
    pub fn from_spec(
        space: &'a ModelSpace<f64>,
        spec: DensitySpec,
        center: ModelPoint<f64>,
    ) -> Result<Self> {
        match spec {
            DensitySpec::Constant { value } => Ok(Self::constant(value)),
            DensitySpec::Gaussian { beta } => Ok(Self::new(
                move |p| (-beta * distance_sq(space, p.rep(), center.rep())).exp(),
                None,
            )),
            DensitySpec::Bump { radius } => {
                if !(radius > 0.0) {
                    return Err(Error::InvalidParameter(
                        "bump radius must be positive".into(),
                    ));
                }
                Ok(Self::new(
                    move |p| {
                        let t = distance_sq(space, p.rep(), center.rep()) / (radius * radius);
                        if t < 1.0 {
                            (1.0 - 1.0 / (1.0 - t)).exp()
                        } else {
                            0.0
                        }
                    },
                    Some(radius),
                ))
            }
            DensitySpec::ZonalHarmonic => {
                if !is_compact_space(space) {
                    return Err(Error::Unsupported(
                        "zonal harmonic needs the elliptic case with p = n".into(),
                    ));
                }
                let n1 = (space.n() + 1) as f64;
                Ok(Self::new(
                    move |p| n1 * similarity(space, p.rep(), center.rep()) - 1.0,
                    None,
                ))
            }
        }
    }
}

/// Registry of test functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySpec {
    Constant {
        value: f64,
    },
    /// `exp(-beta d^2)`.
    Gaussian {
        beta: f64,
    },
    /// `exp(1 - 1/(1 - d^2/radius^2))` inside `d < radius`.
    Bump {
        radius: f64,
    },
    /// `(n+1) c - 1` with `c = k^2 |<x, z0>|^2` (compact elliptic case).
    ZonalHarmonic,
}

fn is_compact_space(space: &ModelSpace<f64>) -> bool {
    matches!(space.class(), GeneratorClass::Elliptic { p, .. } if p == space.n())
}

/// `k^2 |<x, y>|^2` for the Hermitian form `<x, y> = Omega(x, Jy) - i Omega(x, y)`, `J = A/k`.
pub fn similarity(space: &ModelSpace<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let k = space.class().lambda().abs().sqrt();
    let jy = space.a() * y / k;
    let (re, im) = (space.pair(x, &jy), space.pair(x, y));
    k * k * (re * re + im * im)
}

/// `1 - c` in the compact elliptic case, else the squared distance between
/// canonical representatives.
pub fn distance_sq(space: &ModelSpace<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    if is_compact_space(space) {
        (1.0 - similarity(space, x, y)).max(0.0)
    } else {
        (x - y).norm_squared()
    }
}

/// `vol(CP^q) = pi^q / (k^q q!)` for the reduced form.
pub fn cpq_volume(q: usize, k: f64) -> f64 {
    let fact: f64 = (1..=q).map(|i| i as f64).product();
    PI.powi(q as i32) / (k.powi(q as i32) * fact)
}

/// Value of a stochastic or deterministic integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    fn from_samples(v: &[f64]) -> Self {
        let n = v.len();
        let mean = compensated_sum(v.iter().copied()) / n as f64;
        let var = if n > 1 {
            compensated_sum(v.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            value: mean,
            stderr: (var / n as f64).sqrt(),
            samples: n,
        }
    }
}

/// How to integrate over a submanifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case", deny_unknown_fields)]
pub enum QuadratureScheme {
    /// Gauss–Legendre in the hyperspherical angles times uniform phases (compact `S`).
    Grid { n_theta: usize, n_phi: usize },
    /// Uniform samples from normalized complex Gaussians (compact `S`).
    MonteCarlo { samples: usize, seed: u64 },
    /// Gauss–Legendre on `[-radius, radius]^{2q}` in a slice chart.
    Truncated { radius: f64, order: usize },
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        Self::Grid {
            n_theta: 24,
            n_phi: 48,
        }
    }
}

/// Nodes and weights of `omega_red^q / q!` on a submanifold.
#[derive(Debug, Clone)]
pub struct SubmanifoldQuadrature {
    pub nodes: Vec<ModelPoint<f64>>,
    pub weights: Vec<f64>,
    pub scheme: QuadratureScheme,
    compact: bool,
}

impl SubmanifoldQuadrature {
    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn is_compact(&self) -> bool {
        self.compact
    }
}

fn is_compact_sub(s: &GeodesicSubmanifold<f64>) -> bool {
    matches!(s.invariants(), OrbitInvariants::Elliptic { q, p } if p == q)
}

/// Unitary frame `(F_0 = x sqrt(k), F_1, ..)` of `W` in ambient coordinates.
fn unitary_frame(
    space: &ModelSpace<f64>,
    s: &GeodesicSubmanifold<f64>,
) -> Result<(Vec<DVector<f64>>, f64)> {
    let k = space.class().lambda().abs().sqrt();
    let ind = geodesic_sub::induced_model(space, s)?;
    let d = &ind.embedding;
    let ow = ind.space.omega().matrix();
    let seed = -(ow * d.transpose() * space.omega().matrix() * s.base().rep()) * k.sqrt();
    let jw = ind.space.a() / k;
    let (frame, signs) = linalg::hermitian_frame(ow, &jw, &[seed], 1e-10)?;
    if signs.iter().any(|&g| g < 0) {
        return Err(Error::Divergence);
    }
    Ok((frame.iter().map(|f| d * f).collect(), k))
}

fn point_from_coeffs(
    space: &ModelSpace<f64>,
    frame: &[DVector<f64>],
    k: f64,
    c: &[Complex<f64>],
) -> DVector<f64> {
    let dim = space.ambient_dim();
    let mut x = DVector::zeros(dim);
    for (f, cj) in frame.iter().zip(c) {
        let jf = space.a() * f / k;
        x += f * cj.re + jf * cj.im;
    }
    x / k.sqrt()
}

fn hyperspherical(theta: &[f64], phi: &[f64]) -> Vec<Complex<f64>> {
    let q = theta.len();
    let mut c = Vec::with_capacity(q + 1);
    let mut s = 1.0;
    for j in 0..=q {
        let radial = if j < q { s * theta[j].cos() } else { s };
        let phase = if j == 0 {
            Complex::new(1.0, 0.0)
        } else {
            Complex::from_polar(1.0, phi[j - 1])
        };
        c.push(phase * radial);
        if j < q {
            s *= theta[j].sin();
        }
    }
    c
}

/// `|Pf(Omega(d_a x, d_b x))|` by central differences of a parametrization.
fn volume_density<F: Fn(&[f64]) -> Option<DVector<f64>>>(
    space: &ModelSpace<f64>,
    x: F,
    s: &[f64],
    h: f64,
) -> Option<f64> {
    let dim = s.len();
    let mut tangents = Vec::with_capacity(dim);
    for a in 0..dim {
        let mut sp = s.to_vec();
        let mut sm = s.to_vec();
        sp[a] += h;
        sm[a] -= h;
        tangents.push((x(&sp)? - x(&sm)?) / (2.0 * h));
    }
    Some(linalg::pfaffian_abs(&space.omega().gram(&tangents)))
}

/// Every combination of per-axis values.
fn product_grid(axes: &[(Vec<f64>, Vec<f64>)]) -> Vec<(Vec<f64>, f64)> {
    let mut out = vec![(Vec::new(), 1.0)];
    for (nodes, weights) in axes {
        let mut next = Vec::with_capacity(out.len() * nodes.len());
        for (pt, w) in &out {
            for (x, wx) in nodes.iter().zip(weights) {
                let mut p = pt.clone();
                p.push(*x);
                next.push((p, w * wx));
            }
        }
        out = next;
    }
    out
}

/// Product rule on `CP^q` in hyperspherical angles and phases. The weights
/// depend only on `(q, k)` and the resolution, so one rule serves every
/// compact submanifold of the same dimension.
#[derive(Debug, Clone)]
pub struct CpqRule {
    q: usize,
    n_theta: usize,
    n_phi: usize,
    coeffs: Vec<Vec<Complex<f64>>>,
    weights: Vec<f64>,
}

impl CpqRule {
    /// Builds the rule, measuring the volume density on `s`.
    pub fn new(
        space: &ModelSpace<f64>,
        s: &GeodesicSubmanifold<f64>,
        n_theta: usize,
        n_phi: usize,
    ) -> Result<Self> {
        if !is_compact_sub(s) {
            return Err(Error::Divergence);
        }
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::InvalidParameter(
                "grid resolution must be positive".into(),
            ));
        }
        let q = s.q();
        let (frame, k) = unitary_frame(space, s)?;
        let th = gauss_legendre_on(n_theta, 0.0, PI / 2.0);
        let dphi = 2.0 * PI / n_phi as f64;
        let ph = (
            (0..n_phi)
                .map(|j| dphi * (j as f64 + 0.5))
                .collect::<Vec<_>>(),
            vec![dphi; n_phi],
        );
        let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..q)
            .map(|_| th.clone())
            .chain((0..q).map(|_| ph.clone()))
            .collect();
        let param = |v: &[f64]| {
            Some(point_from_coeffs(
                space,
                &frame,
                k,
                &hyperspherical(&v[..q], &v[q..]),
            ))
        };
        let mut coeffs = Vec::new();
        let mut weights = Vec::new();
        for (v, w) in product_grid(&axes) {
            let dens = volume_density(space, param, &v, 1e-6).ok_or(Error::Divergence)?;
            coeffs.push(hyperspherical(&v[..q], &v[q..]));
            weights.push(w * dens);
        }
        Ok(Self {
            q,
            n_theta,
            n_phi,
            coeffs,
            weights,
        })
    }

    /// Nodes on `s` in its own unitary frame.
    pub fn on(
        &self,
        space: &ModelSpace<f64>,
        s: &GeodesicSubmanifold<f64>,
    ) -> Result<SubmanifoldQuadrature> {
        if s.q() != self.q || !is_compact_sub(s) {
            return Err(Error::InvalidParameter(
                "rule and submanifold differ in dimension or type".into(),
            ));
        }
        let (frame, k) = unitary_frame(space, s)?;
        let nodes = self
            .coeffs
            .iter()
            .map(|c| space.canonical_rep(&point_from_coeffs(space, &frame, k, c), 1e-7))
            .collect::<Result<Vec<_>>>()?;
        Ok(SubmanifoldQuadrature {
            nodes,
            weights: self.weights.clone(),
            scheme: QuadratureScheme::Grid {
                n_theta: self.n_theta,
                n_phi: self.n_phi,
            },
            compact: true,
        })
    }
}

/// Quadrature for the invariant measure `omega_red^q / q!` on `S`.
pub fn vol_form_quadrature(
    space: &ModelSpace<f64>,
    s: &GeodesicSubmanifold<f64>,
    scheme: QuadratureScheme,
) -> Result<SubmanifoldQuadrature> {
    let q = s.q();
    let compact = is_compact_sub(s);
    if q == 0 {
        return Ok(SubmanifoldQuadrature {
            nodes: vec![s.base().clone()],
            weights: vec![1.0],
            scheme,
            compact: true,
        });
    }
    let tol = 1e-7;
    match scheme {
        QuadratureScheme::Grid { n_theta, n_phi } => {
            CpqRule::new(space, s, n_theta, n_phi)?.on(space, s)
        }
        QuadratureScheme::MonteCarlo { samples, seed } => {
            if !compact {
                return Err(Error::Divergence);
            }
            if samples == 0 {
                return Err(Error::InvalidParameter(
                    "sample count must be positive".into(),
                ));
            }
            let (frame, k) = unitary_frame(space, s)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = cpq_volume(q, k) / samples as f64;
            let mut nodes = Vec::with_capacity(samples);
            for _ in 0..samples {
                let c: Vec<Complex<f64>> = (0..=q)
                    .map(|_| Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                    .collect();
                let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let c: Vec<Complex<f64>> = c.iter().map(|z| z / norm).collect();
                nodes.push(space.canonical_rep(&point_from_coeffs(space, &frame, k, &c), tol)?);
            }
            Ok(SubmanifoldQuadrature {
                nodes,
                weights: vec![w; samples],
                scheme,
                compact,
            })
        }
        QuadratureScheme::Truncated { radius, order } => {
            if !(radius > 0.0) || order == 0 {
                return Err(Error::InvalidParameter(
                    "truncation radius and order must be positive".into(),
                ));
            }
            let tangent = geodesic_sub::tangent_space(space, s);
            let e = linalg::symplectic_gram_schmidt(space.omega().matrix(), &tangent, 1e-10)?;
            let base = s.base().rep().clone();
            let param = |v: &[f64]| {
                let y = e
                    .iter()
                    .zip(v)
                    .fold(base.clone(), |acc, (ei, si)| acc + ei * *si);
                let l = space.level(&y);
                (l > 1e-12).then(|| y / l.sqrt())
            };
            let axis = gauss_legendre_on(order, -radius, radius);
            let axes = vec![axis; 2 * q];
            let mut nodes = Vec::new();
            let mut weights = Vec::new();
            for (v, w) in product_grid(&axes) {
                let (Some(x), Some(dens)) = (param(&v), volume_density(space, param, &v, 1e-6))
                else {
                    continue;
                };
                let Ok(p) = space.canonical_rep(&x, tol) else {
                    continue;
                };
                nodes.push(p);
                weights.push(w * dens);
            }
            Ok(SubmanifoldQuadrature {
                nodes,
                weights,
                scheme,
                compact,
            })
        }
    }
}

/// `\int_S f d mu`.
pub fn radon(f: &DensityFunction<'_>, quad: &SubmanifoldQuadrature) -> Result<Estimate> {
    if !quad.compact && f.support_radius().is_none() {
        return Err(Error::Divergence);
    }
    let terms: Vec<f64> = quad
        .nodes
        .iter()
        .zip(&quad.weights)
        .map(|(p, w)| w * f.eval(p))
        .collect();
    match quad.scheme {
        QuadratureScheme::MonteCarlo { samples, .. } => {
            let scaled: Vec<f64> = terms.iter().map(|t| t * samples as f64).collect();
            Ok(Estimate::from_samples(&scaled))
        }
        _ => Ok(Estimate {
            value: compensated_sum(terms),
            stderr: 0.0,
            samples: quad.nodes.len(),
        }),
    }
}

/// Haar sampler of submanifolds through a point: `g_p diag(det U^{-1}, U) S_ref`
/// with `U` Haar on `U(n)` and `S_ref` the reference submanifold through the base point.
pub struct IncidenceSampler<'a> {
    space: &'a ModelSpace<f64>,
    point: ModelPoint<f64>,
    g_p: GroupElement<f64>,
    reference: GeodesicSubmanifold<f64>,
}

impl<'a> IncidenceSampler<'a> {
    pub fn new(space: &'a ModelSpace<f64>, p: &ModelPoint<f64>, q: usize) -> Result<Self> {
        if !is_compact_space(space) {
            return Err(Error::Unsupported(
                "invariant measure on orbits of noncompact submanifolds".into(),
            ));
        }
        let reference =
            geodesic_sub::reference_submanifold(space, OrbitInvariants::Elliptic { q, p: q })?;
        let g_p = group::transport(space, &space.base_point(), p)?;
        Ok(Self {
            space,
            point: p.clone(),
            g_p,
            reference,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GeodesicSubmanifold<f64>> {
        let n = self.space.n();
        let u = group::haar_unitary::<f64, _>(n, rng);
        let det = u.clone().determinant();
        let mut c = DMatrix::zeros(n + 1, n + 1);
        c[(0, 0)] = det.conj();
        c.view_mut((1, 1), (n, n)).copy_from(&u);
        let b = GroupElement::new(self.space, group::realify(self.space, &c)?, 1e-8)?;
        let s = act_on_submanifold(self.space, &self.g_p.compose(&b), &self.reference)?;
        if !contains(self.space, &s, &self.point, 1e-7) {
            return Err(Error::Sampler(
                "sampled submanifold misses the point".into(),
            ));
        }
        Ok(s)
    }
}

/// Sampling parameters for the dual transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitQuadrature {
    pub samples: usize,
    pub seed: u64,
}

/// `Rad* F (p)`: mean of `F` over `{S ∋ p}` with the probability-normalized measure.
pub fn dual_radon<F: Fn(&GeodesicSubmanifold<f64>) -> Result<f64>>(
    space: &ModelSpace<f64>,
    f: F,
    p: &ModelPoint<f64>,
    q: usize,
    quad: OrbitQuadrature,
) -> Result<Estimate> {
    if quad.samples == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be positive".into(),
        ));
    }
    let sampler = IncidenceSampler::new(space, p, q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(quad.seed);
    let vals = (0..quad.samples)
        .map(|_| f(&sampler.sample(&mut rng)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::from_samples(&vals))
}

/// Haar-uniform point of the compact space.
pub fn uniform_point<R: Rng + ?Sized>(
    space: &ModelSpace<f64>,
    rng: &mut R,
) -> Result<ModelPoint<f64>> {
    let b = group::haar_su(space, rng)?;
    group::act(space, &b, &space.base_point())
}
