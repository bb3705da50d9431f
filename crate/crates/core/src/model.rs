//! The reduced space `M_A = Sigma_A / exp tA`: points, horizontal lifts, the
//! reduced form, geodesics of the reduced connection, symmetries and charts.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ambient::{self, AdaptedBasis, Generator, GeneratorClass, SymplecticForm};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// A point of `M_A`, carried by its canonical representative on `Sigma_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPoint<T: Real> {
    rep: DVector<T>,
}

impl<T: Real> ModelPoint<T> {
    pub fn rep(&self) -> &DVector<T> {
        &self.rep
    }
}

/// A tangent vector to `M_A`, stored as its horizontal lift at the base representative.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalVector<T: Real> {
    base: ModelPoint<T>,
    vec: DVector<T>,
}

impl<T: Real> HorizontalVector<T> {
    pub fn base(&self) -> &ModelPoint<T> {
        &self.base
    }

    pub fn vec(&self) -> &DVector<T> {
        &self.vec
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            base: self.base.clone(),
            vec: &self.vec * s,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.base != other.base {
            return Err(Error::BaseMismatch);
        }
        Ok(Self {
            base: self.base.clone(),
            vec: &self.vec + &other.vec,
        })
    }
}

/// Case-specific global coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Chart<T: Real> {
    /// `(u, v)` in `T*S^n`: `|u| = 1`, `u . v = 0`.
    CotangentSphere { u: DVector<T>, v: DVector<T> },
    /// Phase-fixed representative `z` of a complex line, `<z, z> = 1/k`.
    ProjectiveLine { z: Vec<Complex<T>> },
    /// `(v, eta, w)` in `T*Q x W'`: `g(v, v) = 1`, `eta(v) = 0`.
    CotangentQuadricTimesW {
        v: DVector<T>,
        eta: DVector<T>,
        w: DVector<T>,
    },
}

impl<T: Real> Chart<T> {
    /// Real coordinates laid end to end.
    pub fn flatten(&self) -> DVector<T> {
        match self {
            Chart::CotangentSphere { u, v } => concat(&[u, v]),
            Chart::ProjectiveLine { z } => {
                let re = DVector::from_iterator(z.len(), z.iter().map(|c| c.re));
                let im = DVector::from_iterator(z.len(), z.iter().map(|c| c.im));
                concat(&[&re, &im])
            }
            Chart::CotangentQuadricTimesW { v, eta, w } => concat(&[v, eta, w]),
        }
    }
}

fn concat<T: Real>(parts: &[&DVector<T>]) -> DVector<T> {
    let len = parts.iter().map(|p| p.len()).sum();
    DVector::from_iterator(len, parts.iter().flat_map(|p| p.iter().copied()))
}

/// One row of a geodesic trace. Residuals are measured before the per-step
/// re-projection onto the constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<T: Real> {
    pub t: T,
    pub x: DVector<T>,
    pub level_residual: T,
    pub pair_x: T,
    pub pair_ax: T,
}

/// JSON form of a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRecord {
    pub rep: Vec<f64>,
}

/// The model space built from `(R^{2n+2}, Omega)` and a generator `A`.
#[derive(Debug, Clone)]
pub struct ModelSpace<T: Real> {
    omega: SymplecticForm<T>,
    generator: Generator<T>,
    class: GeneratorClass<T>,
    basis: AdaptedBasis<T>,
    tol: T,
}

impl<T: Real> ModelSpace<T> {
    pub fn new(omega: SymplecticForm<T>, generator: Generator<T>, tol: T) -> Result<Self> {
        let basis = ambient::adapted_basis(&omega, &generator, tol)?;
        let class = basis.class;
        let space = Self {
            omega,
            generator,
            class,
            basis,
            tol,
        };
        // the base point witnesses that Sigma_A is nonempty
        let x = space.base_rep();
        let q = space.level(&x);
        if (q - T::one()).abs() > T::lit(100.0) * tol {
            return Err(Error::Conditioning(
                "normal-form base point misses the level set".into(),
            ));
        }
        Ok(space)
    }

    /// Space with the standard-coordinate normal form of `class`.
    pub fn from_class(n: usize, class: GeneratorClass<T>, tol: T) -> Result<Self> {
        let omega = SymplecticForm::standard(n)?;
        let a = ambient::standard_normal_generator(n, &class)?;
        let gen = Generator::new(&omega, a, tol)?;
        Self::new(omega, gen, tol)
    }

    pub fn omega(&self) -> &SymplecticForm<T> {
        &self.omega
    }

    pub fn generator(&self) -> &Generator<T> {
        &self.generator
    }

    pub fn a(&self) -> &DMatrix<T> {
        self.generator.matrix()
    }

    pub fn class(&self) -> GeneratorClass<T> {
        self.class
    }

    pub fn basis(&self) -> &AdaptedBasis<T> {
        &self.basis
    }

    pub fn tol(&self) -> T {
        self.tol
    }

    /// Half the dimension of `M_A`.
    pub fn n(&self) -> usize {
        self.omega.n()
    }

    /// Ambient dimension `2n + 2`.
    pub fn ambient_dim(&self) -> usize {
        self.omega.dim()
    }

    /// `Omega(x, y)`.
    #[inline]
    pub fn pair(&self, x: &DVector<T>, y: &DVector<T>) -> T {
        self.omega.pair(x, y)
    }

    /// `Omega(x, Ax)`.
    pub fn level(&self, x: &DVector<T>) -> T {
        self.pair(x, &(self.a() * x))
    }

    /// `exp(tau A)` in closed form.
    pub fn exp_a(&self, tau: T) -> DMatrix<T> {
        linalg::exp_generator(self.a(), self.class.lambda(), tau)
    }

    /// Coordinates of an ambient vector in the adapted basis.
    pub fn adapted_coords(&self, x: &DVector<T>) -> DVector<T> {
        &self.basis.t_inv * x
    }

    fn signs(&self) -> Vec<T> {
        match self.class {
            GeneratorClass::Elliptic { p, .. } => ambient::elliptic_signs(self.n(), p),
            GeneratorClass::Nilpotent { r, p, .. } => ambient::nilpotent_signs(r, p),
            GeneratorClass::Hyperbolic { .. } => vec![T::one(); self.n() + 1],
        }
    }

    fn base_rep(&self) -> DVector<T> {
        let dim = self.ambient_dim();
        let h = self.n() + 1;
        let mut y = DVector::zeros(dim);
        match self.class {
            GeneratorClass::Hyperbolic { k } => {
                y[0] = -T::one() / (k + k);
                y[h] = T::one();
            }
            GeneratorClass::Elliptic { k, .. } => y[0] = T::one() / k.sqrt(),
            GeneratorClass::Nilpotent { r, .. } => y[r] = T::one(),
        }
        &self.basis.t * y
    }

    /// Reference point: `(-(1/2k) e_1, e_1)`, `e_1 / sqrt(k)` or `(0, e_1, 0)` in adapted coordinates.
    pub fn base_point(&self) -> ModelPoint<T> {
        self.canonical_rep(&self.base_rep(), self.tol)
            .expect("base point lies on the level set")
    }

    /// Orbit parameter `tau` such that `exp(tau A) x` satisfies the case rule.
    fn canonical_tau(&self, x: &DVector<T>) -> Result<T> {
        let y = self.adapted_coords(x);
        let h = self.n() + 1;
        match self.class {
            GeneratorClass::Hyperbolic { k } => {
                let nv = y.rows(h, h).norm();
                Ok(nv.ln() / k)
            }
            GeneratorClass::Elliptic { k, .. } => {
                let g = self.signs();
                let zs: Vec<Complex<T>> = (0..h)
                    .map(|j| Complex::new(y[j], g[j] * y[h + j]))
                    .collect();
                let total: T = zs
                    .iter()
                    .map(|z| z.norm_sqr())
                    .fold(T::zero(), |a, b| a + b);
                let thr = T::lit(1e-8) * total;
                let z = zs
                    .iter()
                    .find(|z| z.norm_sqr() > thr)
                    .ok_or(Error::OffLevelSet(1.0))?;
                Ok(-z.im.atan2(z.re) / k)
            }
            GeneratorClass::Nilpotent { r, p, .. } => {
                let g = self.signs();
                let (mut gav, mut gvv) = (T::zero(), T::zero());
                for i in 0..r {
                    gav += g[i] * y[i] * y[r + i];
                    gvv += g[i] * y[r + i] * y[r + i];
                }
                if p == 1 && y[r] <= T::zero() {
                    return Err(Error::WrongComponent);
                }
                Ok(-gav / gvv)
            }
        }
    }

    /// Canonical representative of `pi(x)` together with the orbit parameter used.
    pub fn canonicalize(&self, x: &DVector<T>, tol: T) -> Result<(ModelPoint<T>, T)> {
        if x.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                found: x.len(),
            });
        }
        let q = self.level(x);
        // rounding in Omega(x, Ax) grows with |x| |Ax|
        let scale = (x.norm() * (self.a() * x).norm()).max(T::one());
        if !((q - T::one()).abs() <= tol * scale) {
            return Err(Error::OffLevelSet((q - T::one()).abs().as_f64()));
        }
        let x = x / q.sqrt();
        let tau = self.canonical_tau(&x)?;
        let rep = self.exp_a(tau) * x;
        Ok((ModelPoint { rep }, tau))
    }

    /// Canonical representative of `pi(x)`.
    pub fn canonical_rep(&self, x: &DVector<T>, tol: T) -> Result<ModelPoint<T>> {
        self.canonicalize(x, tol).map(|(p, _)| p)
    }

    /// Canonical representative of `pi(x / sqrt(Omega(x, Ax)))`.
    pub fn normalize(&self, x: &DVector<T>) -> Result<ModelPoint<T>> {
        let q = self.level(x);
        if !(q > T::zero()) {
            return Err(Error::OffLevelSet(q.as_f64()));
        }
        self.canonical_rep(&(x / q.sqrt()), self.tol)
    }

    /// Whether the canonical representatives agree within `tol` (relative).
    pub fn points_equal(&self, p: &ModelPoint<T>, q: &ModelPoint<T>, tol: T) -> bool {
        let scale = p.rep.norm().max(q.rep.norm()).max(T::one());
        (&p.rep - &q.rep).norm() <= tol * scale
    }

    /// Projection onto `Span{x, Ax}^Omega` for any `x` with `Omega(x, Ax) != 0`.
    pub fn hproj_at(&self, x: &DVector<T>, w: &DVector<T>) -> DVector<T> {
        let ax = self.a() * x;
        let q = self.pair(x, &ax);
        let a = self.pair(w, &ax) / q;
        let b = self.pair(w, x) / q;
        w - x * a + ax * b
    }

    pub fn horizontal_project(&self, p: &ModelPoint<T>, w: &DVector<T>) -> HorizontalVector<T> {
        HorizontalVector {
            base: p.clone(),
            vec: self.hproj_at(&p.rep, w),
        }
    }

    /// Wraps an ambient vector that is already horizontal at `p`.
    pub fn horizontal(
        &self,
        p: &ModelPoint<T>,
        v: DVector<T>,
        tol: T,
    ) -> Result<HorizontalVector<T>> {
        let ax = self.a() * &p.rep;
        let scale = v.norm().max(T::one()) * p.rep.norm().max(T::one());
        let res = self.pair(&v, &p.rep).abs().max(self.pair(&v, &ax).abs());
        if res > tol * scale {
            return Err(Error::InvalidParameter(format!(
                "vector is not horizontal (residual {:e})",
                res.as_f64()
            )));
        }
        Ok(HorizontalVector {
            base: p.clone(),
            vec: v,
        })
    }

    /// `omega_red(X, Y) = Omega(X_bar, Y_bar)`.
    pub fn omega_red(&self, x: &HorizontalVector<T>, y: &HorizontalVector<T>) -> Result<T> {
        if x.base != y.base {
            return Err(Error::BaseMismatch);
        }
        Ok(self.pair(&x.vec, &y.vec))
    }

    /// Darboux basis `[e_1..e_n, f_1..f_n]` of the horizontal space at `p`.
    pub fn horizontal_basis(&self, p: &ModelPoint<T>) -> Result<Vec<DVector<T>>> {
        let dim = self.ambient_dim();
        let cands: Vec<DVector<T>> = (0..dim)
            .map(|j| {
                self.hproj_at(
                    &p.rep,
                    &DVector::from_fn(dim, |i, _| if i == j { T::one() } else { T::zero() }),
                )
            })
            .collect();
        let b = linalg::symplectic_gram_schmidt(self.omega.matrix(), &cands, T::lit(1e-10))?;
        if b.len() != 2 * self.n() {
            return Err(Error::DegenerateFrame(format!(
                "horizontal space of dimension {}",
                b.len()
            )));
        }
        Ok(b)
    }

    /// Uniform-in-adapted-coordinates Gaussian point, rescaled onto `Sigma_A`.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelPoint<T> {
        let dim = self.ambient_dim();
        loop {
            let mut y = DVector::from_fn(dim, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
            if let GeneratorClass::Nilpotent { r, p: 1, .. } = self.class {
                if y[r] < T::zero() {
                    y = -y;
                }
            }
            let x = &self.basis.t * y;
            let q = self.level(&x);
            if q > T::lit(1e-2) * x.norm_squared() {
                if let Ok(p) = self.canonical_rep(&(x / q.sqrt()), self.tol) {
                    return p;
                }
            }
        }
    }

    /// Gaussian ambient vector projected to the horizontal space.
    pub fn random_horizontal<R: Rng + ?Sized>(
        &self,
        p: &ModelPoint<T>,
        rng: &mut R,
    ) -> HorizontalVector<T> {
        let w = DVector::from_fn(self.ambient_dim(), |_, _| {
            T::lit(rng.sample::<f64, _>(StandardNormal))
        });
        self.horizontal_project(p, &w)
    }

    /// `pi(renormalize(x + w))`.
    pub fn retract(&self, p: &ModelPoint<T>, w: &DVector<T>) -> Result<ModelPoint<T>> {
        self.normalize(&(&p.rep + w))
    }

    /// Pushes a horizontal vector to the canonical representative of `exp(tau A) x`.
    pub fn push_vector(&self, v: &DVector<T>, tau: T, base: &ModelPoint<T>) -> HorizontalVector<T> {
        HorizontalVector {
            base: base.clone(),
            vec: self.exp_a(tau) * v,
        }
    }

    /// Geodesic of the reduced connection, returned with its velocity.
    ///
    /// The lift `c` solves `c'' = Omega(Ac', c') c` with `c(0) = x`, `c'(0) = X_bar`;
    /// classical RK4 with per-step re-projection onto the constraints.
    pub fn geodesic(
        &self,
        x: &HorizontalVector<T>,
        t: T,
        step: T,
    ) -> Result<(ModelPoint<T>, HorizontalVector<T>)> {
        let (c, v, _) = self.integrate(x, t, step, None)?;
        let (p, tau) = self.canonicalize(&c, T::lit(100.0) * self.tol)?;
        let v = self.push_vector(&v, tau, &p);
        Ok((p, v))
    }

    /// Geodesic trace with one row every `every` steps (and the final step).
    pub fn geodesic_path(
        &self,
        x: &HorizontalVector<T>,
        t: T,
        step: T,
        every: usize,
    ) -> Result<Vec<TraceRow<T>>> {
        let mut rows = Vec::new();
        self.integrate(x, t, step, Some((&mut rows, every.max(1))))?;
        Ok(rows)
    }

    fn integrate(
        &self,
        x: &HorizontalVector<T>,
        t: T,
        step: T,
        mut trace: Option<(&mut Vec<TraceRow<T>>, usize)>,
    ) -> Result<(DVector<T>, DVector<T>, usize)> {
        if !(step > T::zero()) || !step.is_finite() {
            return Err(Error::InvalidStep(step.as_f64()));
        }
        let a = self.a();
        let mut c = x.base.rep.clone();
        let mut v = x.vec.clone();
        let nsteps = if t == T::zero() {
            0
        } else {
            (t.abs() / step).ceil().to_usize().unwrap_or(0).max(1)
        };
        let h = if nsteps == 0 {
            T::zero()
        } else {
            t / T::count(nsteps)
        };
        let half = T::lit(0.5);
        let sixth = T::one() / T::lit(6.0);
        let limit = T::lit(100.0) * self.tol;
        let accel = |c: &DVector<T>, v: &DVector<T>| c * self.pair(&(a * v), v);
        if let Some((rows, _)) = trace.as_mut() {
            rows.push(TraceRow {
                t: T::zero(),
                x: c.clone(),
                level_residual: T::zero(),
                pair_x: T::zero(),
                pair_ax: T::zero(),
            });
        }
        for i in 0..nsteps {
            let k1c = v.clone();
            let k1v = accel(&c, &v);
            let c2 = &c + &k1c * (h * half);
            let v2 = &v + &k1v * (h * half);
            let k2v = accel(&c2, &v2);
            let c3 = &c + &v2 * (h * half);
            let v3 = &v + &k2v * (h * half);
            let k3v = accel(&c3, &v3);
            let c4 = &c + &v3 * h;
            let v4 = &v + &k3v * h;
            let k4v = accel(&c4, &v4);
            c += (&k1c + &v2 * T::lit(2.0) + &v3 * T::lit(2.0) + &v4) * (h * sixth);
            v += (&k1v + &k2v * T::lit(2.0) + &k3v * T::lit(2.0) + &k4v) * (h * sixth);

            let ac = a * &c;
            let q = self.pair(&c, &ac);
            let vn = v.norm().max(T::tiny());
            let level_residual = (q - T::one()).abs();
            let pair_x = self.pair(&v, &c).abs() / (vn * c.norm());
            let pair_ax = self.pair(&v, &ac).abs() / (vn * ac.norm().max(T::tiny()));
            let drift = level_residual.max(pair_x).max(pair_ax);
            if !(drift <= limit) {
                return Err(Error::IntegrationFailure(drift.as_f64()));
            }
            c /= q.sqrt();
            v = self.hproj_at(&c, &v);
            if let Some((rows, every)) = trace.as_mut() {
                if (i + 1) % *every == 0 || i + 1 == nsteps {
                    rows.push(TraceRow {
                        t: h * T::count(i + 1),
                        x: c.clone(),
                        level_residual,
                        pair_x,
                        pair_ax,
                    });
                }
            }
        }
        Ok((c, v, nsteps))
    }

    /// Matrix of `S_x(v) = -v - 2 Omega(v, x) Ax + 2 Omega(v, Ax) x`.
    pub fn symmetry_matrix(&self, p: &ModelPoint<T>) -> DMatrix<T> {
        let dim = self.ambient_dim();
        let o = self.omega.matrix();
        let x = &p.rep;
        let ax = self.a() * x;
        // Omega(v, y) = v^T (Omega y)
        let ox = o * x;
        let oax = o * &ax;
        -DMatrix::<T>::identity(dim, dim) - (&ax * ox.transpose()) * T::lit(2.0)
            + (x * oax.transpose()) * T::lit(2.0)
    }

    /// `s_p(q) = pi(S_x(rep q))`.
    pub fn symmetry(&self, p: &ModelPoint<T>, q: &ModelPoint<T>) -> Result<ModelPoint<T>> {
        let y = self.symmetry_matrix(p) * &q.rep;
        self.normalize(&y)
    }

    /// Differential of a map of `M_A` by central differences along `retract`,
    /// returned as the horizontal lift at the image.
    pub fn pushforward<F>(&self, f: F, x: &HorizontalVector<T>, h: T) -> Result<HorizontalVector<T>>
    where
        F: Fn(&ModelPoint<T>) -> Result<ModelPoint<T>>,
    {
        let image = f(&x.base)?;
        let d = |s: T| -> Result<DVector<T>> {
            let plus = f(&self.retract(&x.base, &(&x.vec * s))?)?;
            let minus = f(&self.retract(&x.base, &(&x.vec * -s))?)?;
            Ok((plus.rep - minus.rep) / (s + s))
        };
        let d1 = d(h)?;
        let d2 = d(h * T::lit(0.5))?;
        let w = (d2 * T::lit(4.0) - d1) / T::lit(3.0);
        Ok(self.horizontal_project(&image, &w))
    }

    /// Global chart of the point.
    pub fn to_chart(&self, p: &ModelPoint<T>) -> Result<Chart<T>> {
        let y = self.adapted_coords(&p.rep);
        let h = self.n() + 1;
        match self.class {
            GeneratorClass::Hyperbolic { k } => {
                let u = y.rows(0, h).into_owned();
                let v = y.rows(h, h).into_owned();
                let nv = v.norm();
                let ut = &v / nv;
                let vt = u * nv + &v / ((k + k) * nv);
                Ok(Chart::CotangentSphere { u: ut, v: vt })
            }
            GeneratorClass::Elliptic { .. } => {
                let g = self.signs();
                Ok(Chart::ProjectiveLine {
                    z: (0..h)
                        .map(|j| Complex::new(y[j], g[j] * y[h + j]))
                        .collect(),
                })
            }
            GeneratorClass::Nilpotent { r, m, .. } => {
                let g = self.signs();
                let a = y.rows(0, r).into_owned();
                let v = y.rows(r, r).into_owned();
                let w = y.rows(2 * r, 2 * m).into_owned();
                let eta = DVector::from_fn(r, |i, _| -g[i] * a[i]);
                Ok(Chart::CotangentQuadricTimesW { v, eta, w })
            }
        }
    }

    /// Inverse of [`to_chart`](Self::to_chart).
    pub fn from_chart(&self, c: &Chart<T>) -> Result<ModelPoint<T>> {
        let h = self.n() + 1;
        let check = |res: T, what: &str| -> Result<()> {
            if res > T::lit(100.0) * self.tol {
                Err(Error::InvalidParameter(format!(
                    "chart constraint {what} violated by {:e}",
                    res.as_f64()
                )))
            } else {
                Ok(())
            }
        };
        let y = match (self.class, c) {
            (GeneratorClass::Hyperbolic { k }, Chart::CotangentSphere { u, v }) => {
                self.check_len(u.len(), h)?;
                self.check_len(v.len(), h)?;
                check((u.norm() - T::one()).abs(), "|u| = 1")?;
                check(u.dot(v).abs(), "u . v = 0")?;
                let uu = v - u / (k + k);
                concat(&[&uu, u])
            }
            (GeneratorClass::Elliptic { .. }, Chart::ProjectiveLine { z }) => {
                self.check_len(z.len(), h)?;
                let g = self.signs();
                let re = DVector::from_iterator(h, z.iter().map(|c| c.re));
                let im = DVector::from_fn(h, |j, _| g[j] * z[j].im);
                concat(&[&re, &im])
            }
            (
                GeneratorClass::Nilpotent { r, m, .. },
                Chart::CotangentQuadricTimesW { v, eta, w },
            ) => {
                self.check_len(v.len(), r)?;
                self.check_len(eta.len(), r)?;
                self.check_len(w.len(), 2 * m)?;
                let g = self.signs();
                let gvv = (0..r).fold(T::zero(), |acc, i| acc + g[i] * v[i] * v[i]);
                check((gvv - T::one()).abs(), "g(v, v) = 1")?;
                check(eta.dot(v).abs(), "eta(v) = 0")?;
                let a = DVector::from_fn(r, |i, _| -g[i] * eta[i]);
                concat(&[&a, v, w])
            }
            _ => {
                return Err(Error::WrongCase {
                    expected: self.class.name(),
                })
            }
        };
        self.normalize(&(&self.basis.t * y))
    }

    fn check_len(&self, found: usize, expected: usize) -> Result<()> {
        if found != expected {
            return Err(Error::DimensionMismatch { expected, found });
        }
        Ok(())
    }

    /// Canonical 2-form of the chart target evaluated on two flattened chart
    /// tangent vectors at `c`: `sum d(v)^d(u)` on `T*S^n`, the Fubini-Study type
    /// form `-Im <xi_perp, eta_perp>` on the projective chart, and
    /// `sum d(eta)^d(v) + Omega'` on `T*Q x W'`.
    pub fn canonical_form(&self, c: &Chart<T>, d1: &DVector<T>, d2: &DVector<T>) -> T {
        let h = self.n() + 1;
        match c {
            Chart::CotangentSphere { .. } => {
                let (u1, v1) = (d1.rows(0, h), d1.rows(h, h));
                let (u2, v2) = (d2.rows(0, h), d2.rows(h, h));
                v1.dot(&u2) - u1.dot(&v2)
            }
            Chart::ProjectiveLine { z } => {
                let k = match self.class {
                    GeneratorClass::Elliptic { k, .. } => k,
                    _ => T::one(),
                };
                let g = self.signs();
                let herm = |a: &[Complex<T>], b: &[Complex<T>]| {
                    (0..h).fold(Complex::new(T::zero(), T::zero()), |acc, j| {
                        acc + a[j] * b[j].conj() * g[j]
                    })
                };
                let as_c = |d: &DVector<T>| {
                    (0..h)
                        .map(|j| Complex::new(d[j], d[h + j]))
                        .collect::<Vec<_>>()
                };
                let perp = |xi: Vec<Complex<T>>| {
                    let c = herm(&xi, z) * k;
                    xi.iter()
                        .zip(z)
                        .map(|(a, b)| *a - *b * c)
                        .collect::<Vec<_>>()
                };
                let x1 = perp(as_c(d1));
                let x2 = perp(as_c(d2));
                -herm(&x1, &x2).im
            }
            Chart::CotangentQuadricTimesW { v, w, .. } => {
                let r = v.len();
                let m = w.len() / 2;
                let (v1, e1) = (d1.rows(0, r), d1.rows(r, r));
                let (v2, e2) = (d2.rows(0, r), d2.rows(r, r));
                let mut acc = e1.dot(&v2) - v1.dot(&e2);
                for j in 0..m {
                    acc += d1[2 * r + j] * d2[2 * r + m + j] - d1[2 * r + m + j] * d2[2 * r + j];
                }
                acc
            }
        }
    }

    /// Flattened chart image of a tangent vector, by central differences with
    /// one Richardson step.
    pub fn chart_tangent(&self, x: &HorizontalVector<T>, h: T) -> Result<DVector<T>> {
        let d = |s: T| -> Result<DVector<T>> {
            let plus = self
                .to_chart(&self.retract(&x.base, &(&x.vec * s))?)?
                .flatten();
            let minus = self
                .to_chart(&self.retract(&x.base, &(&x.vec * -s))?)?
                .flatten();
            Ok((plus - minus) / (s + s))
        };
        let d1 = d(h)?;
        let d2 = d(h * T::lit(0.5))?;
        Ok((d2 * T::lit(4.0) - d1) / T::lit(3.0))
    }
}

impl ModelSpace<f64> {
    pub fn point_record(&self, p: &ModelPoint<f64>) -> PointRecord {
        PointRecord {
            rep: p.rep.iter().copied().collect(),
        }
    }

    pub fn point_from_record(&self, rec: &PointRecord) -> Result<ModelPoint<f64>> {
        self.canonical_rep(&DVector::from_vec(rec.rep.clone()), 100.0 * self.tol)
    }
}
