//! Curvature of the reduced connection in local frame charts, its Vaisman
//! split, Ricci tensor and endomorphism, local symmetry, and the projection of
//! a torsion-free connection onto symplectic connections.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ambient::GeneratorClass;
use crate::error::{Error, Result};
use crate::linalg::max_abs;
use crate::model::{HorizontalVector, ModelPoint, ModelSpace};
use crate::scalar::Real;

/// Default finite-difference scale for curvature.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Connection coefficients `Gamma^k_ij` in a coordinate patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel<T: Real> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> Christoffel<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Gamma^k_ij`.
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> T {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, j: usize, v: T) {
        self.data[(k * self.dim + i) * self.dim + j] = v;
    }

    pub fn axpy(&mut self, a: T, other: &Self) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * *y;
        }
    }

    fn lincomb(a: T, x: &Self, b: T, y: &Self) -> Self {
        Self {
            dim: x.dim,
            data: x
                .data
                .iter()
                .zip(&y.data)
                .map(|(u, v)| a * *u + b * *v)
                .collect(),
        }
    }

    /// `max |Gamma^k_ij - Gamma^k_ji|`.
    pub fn torsion(&self) -> T {
        let d = self.dim;
        let mut out = T::zero();
        for k in 0..d {
            for i in 0..d {
                for j in 0..i {
                    out = out.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        out
    }

    /// Matrix `(Gamma_m)^l_k = Gamma^l_mk`.
    pub fn matrix_along(&self, m: usize) -> DMatrix<T> {
        DMatrix::from_fn(self.dim, self.dim, |l, k| self.get(l, m, k))
    }
}

/// A 4-index array with equal extents.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T: Real> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor4<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim.pow(4)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> T {
        self.data[((a * self.dim + b) * self.dim + c) * self.dim + d]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: T) {
        let dim = self.dim;
        self.data[((a * dim + b) * dim + c) * dim + d] = v;
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, x| acc + *x * *x)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a - *b)
                .collect(),
        }
    }
}

/// A field of connection coefficients on a coordinate patch around `s = 0`.
pub trait ConnectionField<T: Real> {
    fn dim(&self) -> usize;
    fn christoffel(&self, s: &DVector<T>) -> Result<Christoffel<T>>;
}

/// A field of symplectic forms on a coordinate patch.
pub trait FormField<T: Real> {
    fn omega_at(&self, s: &DVector<T>) -> Result<DMatrix<T>>;
}

/// Local chart `s -> pi(renormalize(x + sum s_i e_i))` around a point of `M_A`,
/// with `e_i` a Darboux basis of the horizontal space.
#[derive(Debug, Clone)]
pub struct FrameChart<'a, T: Real> {
    space: &'a ModelSpace<T>,
    base: ModelPoint<T>,
    frame: Vec<DVector<T>>,
    ae: Vec<DVector<T>>,
    perturbation: Option<Christoffel<T>>,
}

struct Lifted<T: Real> {
    f: DVector<T>,
    af: DVector<T>,
    q: T,
    fields: Vec<DVector<T>>,
}

impl<'a, T: Real> FrameChart<'a, T> {
    pub fn new(space: &'a ModelSpace<T>, p: &ModelPoint<T>) -> Result<Self> {
        let frame = space.horizontal_basis(p)?;
        Ok(Self::with_frame(space, p, frame))
    }

    pub fn with_frame(space: &'a ModelSpace<T>, p: &ModelPoint<T>, frame: Vec<DVector<T>>) -> Self {
        let ae = frame.iter().map(|e| space.a() * e).collect();
        Self {
            space,
            base: p.clone(),
            frame,
            ae,
            perturbation: None,
        }
    }

    /// Adds constant coefficients `S^k_ij = omega^{kl} sigma_lij` with `sigma` a
    /// random totally symmetric tensor of entries in `[-amp, amp]`. The result
    /// is still torsion-free and symplectic at `s = 0` but no longer locally
    /// symmetric.
    pub fn perturbed(mut self, amp: T, seed: u64) -> Result<Self> {
        let d = self.frame.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sigma = vec![T::zero(); d * d * d];
        for a in 0..d {
            for b in a..d {
                for c in b..d {
                    let v = T::lit(rng.random_range(-1.0..1.0)) * amp;
                    for (x, y, z) in [
                        (a, b, c),
                        (a, c, b),
                        (b, a, c),
                        (b, c, a),
                        (c, a, b),
                        (c, b, a),
                    ] {
                        sigma[(x * d + y) * d + z] = v;
                    }
                }
            }
        }
        let w = self.omega_at(&DVector::zeros(d))?;
        let w_inv = w
            .try_inverse()
            .ok_or_else(|| Error::DegenerateFrame("omega is singular".into()))?;
        let mut s = Christoffel::zeros(d);
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let v = (0..d).fold(T::zero(), |acc, l| {
                        acc + w_inv[(k, l)] * sigma[(l * d + i) * d + j]
                    });
                    s.set(k, i, j, v);
                }
            }
        }
        self.perturbation = Some(s);
        Ok(self)
    }

    pub fn base(&self) -> &ModelPoint<T> {
        &self.base
    }

    pub fn frame(&self) -> &[DVector<T>] {
        &self.frame
    }

    fn lift(&self, s: &DVector<T>) -> Result<Lifted<T>> {
        let sp = self.space;
        let mut f = self.base.rep().clone();
        for (e, si) in self.frame.iter().zip(s.iter()) {
            f.axpy(*si, e, T::one());
        }
        let af = sp.a() * &f;
        let q = sp.pair(&f, &af);
        if !(q > T::zero()) {
            return Err(Error::DegenerateFrame(
                "chart point left the domain Omega(F, AF) > 0".into(),
            ));
        }
        let rq = q.sqrt();
        let fields = self
            .frame
            .iter()
            .map(|e| self.proj(&f, &af, q, e) / rq)
            .collect();
        Ok(Lifted { f, af, q, fields })
    }

    #[inline]
    fn proj(&self, f: &DVector<T>, af: &DVector<T>, q: T, w: &DVector<T>) -> DVector<T> {
        let sp = self.space;
        w - f * (sp.pair(w, af) / q) + af * (sp.pair(w, f) / q)
    }
}

impl<T: Real> FormField<T> for FrameChart<'_, T> {
    fn omega_at(&self, s: &DVector<T>) -> Result<DMatrix<T>> {
        let l = self.lift(s)?;
        Ok(self.space.omega().gram(&l.fields))
    }
}

impl<T: Real> ConnectionField<T> for FrameChart<'_, T> {
    fn dim(&self) -> usize {
        self.frame.len()
    }

    fn christoffel(&self, s: &DVector<T>) -> Result<Christoffel<T>> {
        let sp = self.space;
        let d = self.frame.len();
        let Lifted { f, af, q, fields } = self.lift(s)?;
        let a = sp.a();
        let rq = q.sqrt();
        let half = T::lit(0.5);
        let omega = sp.omega().gram(&fields);
        let w_inv = omega.try_inverse().ok_or_else(|| {
            Error::DegenerateFrame("reduced form is singular on the frame".into())
        })?;
        let afields: Vec<DVector<T>> = fields.iter().map(|v| a * v).collect();
        let mut out = Christoffel::zeros(d);
        for i in 0..d {
            let ei = &self.frame[i];
            let aei = &self.ae[i];
            let qi = sp.pair(ei, &af) * T::lit(2.0);
            let vert = sp.pair(ei, &f) / q;
            for j in 0..d {
                let ej = &self.frame[j];
                let pe = &fields[j] * rq;
                let (w_af, w_f) = (sp.pair(ej, &af), sp.pair(ej, &f));
                let dp = -(&f * sp.pair(ej, aei) + ei * w_af - &af * sp.pair(ej, ei) - aei * w_f)
                    / q
                    + (&f * w_af - &af * w_f) * (qi / (q * q));
                let dij = &pe * (-half * qi / (q * rq)) + dp / rq + &afields[j] * vert;
                let hd = self.proj(&f, &af, q, &dij);
                let b = DVector::from_fn(d, |l, _| sp.pair(&fields[l], &hd));
                let g = &w_inv * b;
                for k in 0..d {
                    out.set(k, i, j, g[k]);
                }
            }
        }
        if let Some(p) = &self.perturbation {
            out.axpy(T::one(), p);
        }
        Ok(out)
    }
}

/// Central difference with one Richardson step.
fn richardson<T: Real, V, F>(f: F, h: T) -> Result<V>
where
    F: Fn(T) -> Result<V>,
    V: RichardsonCombine<T>,
{
    let d1 = f(h)?;
    let d2 = f(h * T::lit(0.5))?;
    Ok(V::combine(d1, d2))
}

trait RichardsonCombine<T: Real> {
    fn combine(coarse: Self, fine: Self) -> Self;
}

impl<T: Real> RichardsonCombine<T> for Christoffel<T> {
    fn combine(coarse: Self, fine: Self) -> Self {
        Christoffel::lincomb(T::lit(4.0 / 3.0), &fine, T::lit(-1.0 / 3.0), &coarse)
    }
}

impl<T: Real> RichardsonCombine<T> for DMatrix<T> {
    fn combine(coarse: Self, fine: Self) -> Self {
        (fine * T::lit(4.0) - coarse) / T::lit(3.0)
    }
}

fn unit<T: Real>(d: usize, m: usize) -> DVector<T> {
    DVector::from_fn(d, |i, _| if i == m { T::one() } else { T::zero() })
}

/// `d Gamma / d s_m` at `s0`.
fn christoffel_derivative<T: Real, C: ConnectionField<T> + ?Sized>(
    conn: &C,
    s0: &DVector<T>,
    m: usize,
    h: T,
) -> Result<Christoffel<T>> {
    let d = conn.dim();
    let em = unit::<T>(d, m);
    richardson(
        |step| {
            let plus = conn.christoffel(&(s0 + &em * step))?;
            let minus = conn.christoffel(&(s0 - &em * step))?;
            Ok(Christoffel::lincomb(
                T::one() / (step + step),
                &plus,
                -T::one() / (step + step),
                &minus,
            ))
        },
        h,
    )
}

/// `R^l_kij` (layout `[l][k][i][j]`) of a coordinate connection, with
/// `R(d_i, d_j) d_k = R^l_kij d_l`, together with `Gamma` at `s0`.
pub fn curvature_of<T: Real, C: ConnectionField<T> + ?Sized>(
    conn: &C,
    s0: &DVector<T>,
    h: T,
) -> Result<(Tensor4<T>, Christoffel<T>)> {
    let d = conn.dim();
    let g = conn.christoffel(s0)?;
    let dg: Vec<Christoffel<T>> = (0..d)
        .map(|m| christoffel_derivative(conn, s0, m, h))
        .collect::<Result<_>>()?;
    let mut r = Tensor4::zeros(d);
    for l in 0..d {
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut v = dg[i].get(l, j, k) - dg[j].get(l, i, k);
                    for m in 0..d {
                        v += g.get(l, i, m) * g.get(m, j, k) - g.get(l, j, m) * g.get(m, i, k);
                    }
                    r.set(l, k, i, j, v);
                }
            }
        }
    }
    Ok((r, g))
}

/// Ricci tensor `r_ik = sum_j R^j_kij` and endomorphism `rho = omega^{-1} r`.
fn ricci_and_rho<T: Real>(r: &Tensor4<T>, omega: &DMatrix<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let d = r.dim();
    let ric = DMatrix::from_fn(d, d, |i, k| {
        (0..d).fold(T::zero(), |acc, j| acc + r.get(j, k, i, j))
    });
    let w_inv = omega
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateFrame("reduced form is singular on the frame".into()))?;
    let rho = w_inv * &ric;
    Ok((ric, rho))
}

/// The Ricci-type tensor `E(X,Y)Z` built from `rho` and `omega`, layout `[l][k][i][j]`.
pub fn ricci_type_tensor<T: Real>(omega: &DMatrix<T>, rho: &DMatrix<T>) -> Tensor4<T> {
    let d = omega.nrows();
    let c = T::one() / T::count(d + 2);
    let two = T::lit(2.0);
    // omega(d_i, rho d_k)
    let wr = omega * rho;
    let mut e = Tensor4::zeros(d);
    for l in 0..d {
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut v = two * omega[(i, j)] * rho[(l, k)] + omega[(i, k)] * rho[(l, j)]
                        - omega[(j, k)] * rho[(l, i)];
                    if l == j {
                        v += wr[(i, k)];
                    }
                    if l == i {
                        v -= wr[(j, k)];
                    }
                    e.set(l, k, i, j, v * c);
                }
            }
        }
    }
    e
}

/// Full curvature data at a point.
#[derive(Debug, Clone)]
pub struct CurvatureSample<T: Real> {
    pub base: ModelPoint<T>,
    pub frame: Vec<DVector<T>>,
    /// `omega(e_i, e_j)` on the frame.
    pub omega: DMatrix<T>,
    /// Connection coefficients at the point.
    pub gamma: Christoffel<T>,
    /// `R^l_kij`, layout `[l][k][i][j]`.
    pub r: Tensor4<T>,
    pub ricci: DMatrix<T>,
    pub rho: DMatrix<T>,
    /// `E` and `W` parts (layout of `r`); `None` when `dim M = 2`.
    pub e_part: Option<Tensor4<T>>,
    pub w_part: Option<Tensor4<T>>,
}

/// Curvature of a connection field at `s0`.
pub fn sample_connection<T: Real, C>(
    conn: &C,
    base: ModelPoint<T>,
    frame: Vec<DVector<T>>,
    s0: &DVector<T>,
    h: T,
) -> Result<CurvatureSample<T>>
where
    C: ConnectionField<T> + FormField<T>,
{
    if !(h > T::zero()) {
        return Err(Error::InvalidStep(h.as_f64()));
    }
    let omega = conn.omega_at(s0)?;
    let (r, gamma) = curvature_of(conn, s0, h)?;
    let (ricci, rho) = ricci_and_rho(&r, &omega)?;
    let mut sample = CurvatureSample {
        base,
        frame,
        omega,
        gamma,
        r,
        ricci,
        rho,
        e_part: None,
        w_part: None,
    };
    if let Ok((e, w)) = vaisman_split(&sample) {
        sample.e_part = Some(e);
        sample.w_part = Some(w);
    }
    Ok(sample)
}

/// Curvature of the reduced connection at `p`.
pub fn curvature_at<T: Real>(
    space: &ModelSpace<T>,
    p: &ModelPoint<T>,
    h: T,
) -> Result<CurvatureSample<T>> {
    let chart = FrameChart::new(space, p)?;
    let d = chart.dim();
    let frame = chart.frame().to_vec();
    sample_connection(&chart, p.clone(), frame, &DVector::zeros(d), h)
}

/// `(E, W)` with `E` the Ricci-type part and `W = R - E`.
pub fn vaisman_split<T: Real>(sample: &CurvatureSample<T>) -> Result<(Tensor4<T>, Tensor4<T>)> {
    if sample.omega.nrows() < 4 {
        return Err(Error::SplitUndefined);
    }
    let e = ricci_type_tensor(&sample.omega, &sample.rho);
    let w = sample.r.sub(&e);
    Ok((e, w))
}

impl<T: Real> CurvatureSample<T> {
    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    /// `omega(R(e_i, e_j) e_k, e_l)`, layout `[i][j][k][l]`.
    pub fn lowered(&self) -> Tensor4<T> {
        let d = self.dim();
        let mut out = Tensor4::zeros(d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let v = (0..d).fold(T::zero(), |acc, m| {
                            acc + self.r.get(m, k, i, j) * self.omega[(m, l)]
                        });
                        out.set(i, j, k, l, v);
                    }
                }
            }
        }
        out
    }

    /// Largest violation of antisymmetry in `(i, j)` and symmetry in `(k, l)` of
    /// `omega(R(e_i, e_j) e_k, e_l)`.
    pub fn antisymmetry_residual(&self) -> T {
        let low = self.lowered();
        let d = self.dim();
        let mut out = T::zero();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let v = low.get(i, j, k, l);
                        out = out
                            .max((v + low.get(j, i, k, l)).abs())
                            .max((v - low.get(i, j, l, k)).abs());
                    }
                }
            }
        }
        out
    }

    /// Largest cyclic sum `R(X,Y)Z + R(Y,Z)X + R(Z,X)Y` over frame triples.
    pub fn bianchi_residual(&self) -> T {
        let d = self.dim();
        let r = &self.r;
        let mut out = T::zero();
        for l in 0..d {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        out = out
                            .max((r.get(l, k, i, j) + r.get(l, i, j, k) + r.get(l, j, k, i)).abs());
                    }
                }
            }
        }
        out
    }

    /// `|W| / max(|R|, 1)` (Frobenius).
    pub fn ricci_type_defect(&self) -> Result<T> {
        let w = self.w_part.as_ref().ok_or(Error::SplitUndefined)?;
        Ok(w.norm() / self.r.norm().max(T::one()))
    }

    /// Least-squares constant `k_hat = tr(rho^2) / 2n`.
    pub fn k_hat(&self) -> T {
        (&self.rho * &self.rho).trace() / T::count(self.dim())
    }

    /// `|rho^2 - k_hat Id| / max(|rho|^2, 1)` (sup norms).
    pub fn rho_squared_residual(&self) -> T {
        let d = self.dim();
        let r2 = &self.rho * &self.rho;
        let dev = max_abs(&(r2 - DMatrix::<T>::identity(d, d) * self.k_hat()));
        let s = max_abs(&self.rho);
        dev / (s * s).max(T::one())
    }

    /// Asymmetry of the Ricci tensor.
    pub fn ricci_symmetry_residual(&self) -> T {
        max_abs(&(&self.ricci - self.ricci.transpose()))
    }

    /// Largest trace of `W`: the Ricci contraction and the `omega`-contraction.
    pub fn w_trace_residual(&self) -> Result<T> {
        let w = self.w_part.as_ref().ok_or(Error::SplitUndefined)?;
        let d = self.dim();
        let w_inv = self
            .omega
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::DegenerateFrame("singular omega".into()))?;
        let mut out = T::zero();
        for i in 0..d {
            for k in 0..d {
                let ric = (0..d).fold(T::zero(), |acc, j| acc + w.get(j, k, i, j));
                out = out.max(ric.abs());
            }
        }
        for l in 0..d {
            for k in 0..d {
                let mut acc = T::zero();
                for i in 0..d {
                    for j in 0..d {
                        acc += w_inv[(i, j)] * w.get(l, k, i, j);
                    }
                }
                out = out.max(acc.abs());
            }
        }
        Ok(out)
    }

    /// `|Tr[Z -> E(X, Z) Y] - r(X, Y)|`.
    pub fn e_contraction_residual(&self) -> Result<T> {
        let e = self.e_part.as_ref().ok_or(Error::SplitUndefined)?;
        let d = self.dim();
        let ric = DMatrix::from_fn(d, d, |i, k| {
            (0..d).fold(T::zero(), |acc, j| acc + e.get(j, k, i, j))
        });
        Ok(max_abs(&(ric - &self.ricci)))
    }

    /// Largest `|[rho, R(e_i, e_j)]|`.
    pub fn rho_commutator_residual(&self) -> T {
        let d = self.dim();
        let mut out = T::zero();
        for i in 0..d {
            for j in 0..d {
                let rij = DMatrix::from_fn(d, d, |l, k| self.r.get(l, k, i, j));
                out = out.max(max_abs(&(&self.rho * &rij - &rij * &self.rho)));
            }
        }
        out
    }

    /// Kahler cross-check for the positive-definite elliptic case: with
    /// `J` the complex structure for which `-omega(., J .)` is positive, fits
    /// `rho = -(k (n+1) / 2) J` and returns `(k, |R - R_kahler| / |R|, |rho - fit|)`.
    pub fn kahler_check(&self, space: &ModelSpace<T>) -> Result<(T, T, T)> {
        let (k_gen, p) = match space.class() {
            GeneratorClass::Elliptic { k, p } => (k, p),
            _ => {
                return Err(Error::WrongCase {
                    expected: "elliptic",
                })
            }
        };
        if p != space.n() {
            return Err(Error::Unsupported("Kahler check needs p = n".into()));
        }
        let d = self.dim();
        let n1 = T::count(space.n() + 1);
        let w_inv = self
            .omega
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::DegenerateFrame("singular omega".into()))?;
        let p0 = &self.base;
        // J = -(A / k) on horizontal vectors, written in the frame
        let b = DMatrix::from_fn(d, d, |l, kk| {
            let jv = space
                .horizontal_project(p0, &(space.a() * &self.frame[kk]))
                .vec()
                .clone()
                / (-k_gen);
            space.pair(&self.frame[l], &jv)
        });
        let j = &w_inv * b;
        let fit = -T::lit(2.0) / n1 * self.rho.dot(&j) / j.dot(&j);
        let rho_fit = max_abs(&(&self.rho + &j * (fit * n1 / T::lit(2.0))));
        let om = &self.omega;
        let owj = om * &j;
        let c = fit / T::lit(4.0);
        let mut rk = Tensor4::zeros(d);
        for l in 0..d {
            for kk in 0..d {
                for x in 0..d {
                    for y in 0..d {
                        // X = e_x, Y = e_y, Z = e_kk
                        let mut v = -T::lit(2.0) * om[(x, y)] * j[(l, kk)]
                            - om[(x, kk)] * j[(l, y)]
                            + om[(y, kk)] * j[(l, x)];
                        if l == y {
                            v -= owj[(x, kk)];
                        }
                        if l == x {
                            v += owj[(y, kk)];
                        }
                        rk.set(l, kk, x, y, v * c);
                    }
                }
            }
        }
        let rel = self.r.sub(&rk).norm() / self.r.norm().max(T::tiny());
        Ok((fit, rel, rho_fit))
    }

    /// Structured summary.
    pub fn report(&self, space: &ModelSpace<T>) -> CurvatureReport {
        CurvatureReport {
            case: space.class().name().to_string(),
            n: space.n(),
            ricci_type_defect: self
                .ricci_type_defect()
                .map(|x| x.as_f64())
                .unwrap_or(f64::NAN),
            bianchi_residual: self.bianchi_residual().as_f64(),
            rho_squared_residual: self.rho_squared_residual().as_f64(),
            k_hat: self.k_hat().as_f64(),
        }
    }
}

/// JSON summary of a curvature sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub case: String,
    pub n: usize,
    pub ricci_type_defect: f64,
    pub bianchi_residual: f64,
    pub rho_squared_residual: f64,
    pub k_hat: f64,
}

/// `rho(X)` from the generator: `-(2n+2) hproj(A X_bar)`.
pub fn ricci_from_generator<T: Real>(
    space: &ModelSpace<T>,
    x: &HorizontalVector<T>,
) -> HorizontalVector<T> {
    let ax = space.a() * x.vec();
    space
        .horizontal_project(x.base(), &ax)
        .scale(-T::count(2 * space.n() + 2))
}

/// Torsion and `nabla omega` residuals at `s0`.
pub fn connection_residuals<T: Real, C>(conn: &C, s0: &DVector<T>, h: T) -> Result<(T, T)>
where
    C: ConnectionField<T> + FormField<T>,
{
    let d = conn.dim();
    let g = conn.christoffel(s0)?;
    let w = conn.omega_at(s0)?;
    let mut nabla = T::zero();
    for i in 0..d {
        let ei = unit::<T>(d, i);
        let dw = richardson(
            |step| {
                Ok(
                    (conn.omega_at(&(s0 + &ei * step))? - conn.omega_at(&(s0 - &ei * step))?)
                        / (step + step),
                )
            },
            h,
        )?;
        for j in 0..d {
            for k in 0..d {
                let mut v = dw[(j, k)];
                for m in 0..d {
                    v -= g.get(m, i, j) * w[(m, k)] + g.get(m, i, k) * w[(j, m)];
                }
                nabla = nabla.max(v.abs());
            }
        }
    }
    Ok((g.torsion(), nabla))
}

/// `max |nabla rho| / max(|rho|, 1)` at `s0`, by differences of `rho` computed
/// at nearby chart points (outer step `10 h`).
pub fn symmetry_defect_of<T: Real, C>(conn: &C, s0: &DVector<T>, h: T) -> Result<T>
where
    C: ConnectionField<T> + FormField<T>,
{
    let d = conn.dim();
    let rho_at = |s: &DVector<T>| -> Result<DMatrix<T>> {
        let (r, _) = curvature_of(conn, s, h)?;
        let (_, rho) = ricci_and_rho(&r, &conn.omega_at(s)?)?;
        Ok(rho)
    };
    let rho0 = rho_at(s0)?;
    let g = conn.christoffel(s0)?;
    let outer = h * T::lit(10.0);
    let mut out = T::zero();
    for m in 0..d {
        let em = unit::<T>(d, m);
        let drho = richardson(
            |step| Ok((rho_at(&(s0 + &em * step))? - rho_at(&(s0 - &em * step))?) / (step + step)),
            outer,
        )?;
        let gm = g.matrix_along(m);
        let nabla = drho + &gm * &rho0 - &rho0 * &gm;
        out = out.max(max_abs(&nabla));
    }
    Ok(out / max_abs(&rho0).max(T::one()))
}

/// Local symmetry defect of the reduced connection at `p`.
pub fn local_symmetry_defect<T: Real>(space: &ModelSpace<T>, p: &ModelPoint<T>, h: T) -> Result<T> {
    let chart = FrameChart::new(space, p)?;
    symmetry_defect_of(&chart, &DVector::zeros(chart.dim()), h)
}

/// Torsion-free connection made symplectic: `Gamma = Gamma0 + (N_ij + N_ji) / 3`
/// with `omega(N(X, Y), Z) = (nabla0_X omega)(Y, Z)`.
pub struct Symplectized<'a, T: Real> {
    omega: &'a dyn FormField<T>,
    gamma0: &'a dyn ConnectionField<T>,
    h: T,
}

/// Builds the symplectization; fails if `gamma0` has torsion at `s0`.
pub fn symplectize<'a, T: Real>(
    omega: &'a dyn FormField<T>,
    gamma0: &'a dyn ConnectionField<T>,
    s0: &DVector<T>,
    h: T,
    tol: T,
) -> Result<Symplectized<'a, T>> {
    let tor = gamma0.christoffel(s0)?.torsion();
    if tor > tol {
        return Err(Error::Torsion(tor.as_f64()));
    }
    Ok(Symplectized { omega, gamma0, h })
}

impl<T: Real> FormField<T> for Symplectized<'_, T> {
    fn omega_at(&self, s: &DVector<T>) -> Result<DMatrix<T>> {
        self.omega.omega_at(s)
    }
}

impl<T: Real> ConnectionField<T> for Symplectized<'_, T> {
    fn dim(&self) -> usize {
        self.gamma0.dim()
    }

    fn christoffel(&self, s: &DVector<T>) -> Result<Christoffel<T>> {
        let d = self.dim();
        let g0 = self.gamma0.christoffel(s)?;
        let w = self.omega.omega_at(s)?;
        let w_inv = w
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::DegenerateFrame("singular omega".into()))?;
        let mut n = Christoffel::zeros(d);
        for i in 0..d {
            let ei = unit::<T>(d, i);
            let dw = richardson(
                |step| {
                    Ok((self.omega.omega_at(&(s + &ei * step))?
                        - self.omega.omega_at(&(s - &ei * step))?)
                        / (step + step))
                },
                self.h,
            )?;
            // t_jk = (nabla0_i omega)_jk
            let t = DMatrix::from_fn(d, d, |j, k| {
                let mut v = dw[(j, k)];
                for m in 0..d {
                    v -= g0.get(m, i, j) * w[(m, k)] + g0.get(m, i, k) * w[(j, m)];
                }
                v
            });
            let nij = &w_inv * t.transpose() * (-T::one());
            for j in 0..d {
                for k in 0..d {
                    n.set(k, i, j, nij[(k, j)]);
                }
            }
        }
        let mut out = g0;
        let third = T::one() / T::lit(3.0);
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let v = out.get(k, i, j) + third * (n.get(k, i, j) + n.get(k, j, i));
                    out.set(k, i, j, v);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::GeneratorClass;
    use rand::SeedableRng;

    fn space(class: GeneratorClass<f64>, n: usize) -> ModelSpace<f64> {
        ModelSpace::from_class(n, class, 1e-9).unwrap()
    }

    #[test]
    fn cp2_is_ricci_type_with_rho_proportional_to_j() {
        let s = space(GeneratorClass::Elliptic { k: 1.0, p: 2 }, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = s.random_point(&mut rng);
        let c = curvature_at(&s, &p, 1e-4).unwrap();
        assert!(c.ricci_type_defect().unwrap() < 1e-6);
        assert!(c.antisymmetry_residual() < 1e-7);
        assert!(c.bianchi_residual() < 1e-7);
        let (k_hol, rel, fit) = c.kahler_check(&s).unwrap();
        assert!(rel < 1e-5 && fit < 1e-5, "{rel:e} {fit:e}");
        assert!((k_hol.abs() - 4.0).abs() < 1e-6, "{k_hol}");
        // rho^2 = (2n+2)^2 lambda
        assert!((c.k_hat() + 36.0).abs() < 1e-6);
    }

    #[test]
    fn rho_agrees_with_generator_formula() {
        for class in [
            GeneratorClass::Hyperbolic { k: 1.0 },
            GeneratorClass::Elliptic { k: 2.0, p: 1 },
            GeneratorClass::Nilpotent { r: 3, p: 2, m: 0 },
        ] {
            let s = space(class, 2);
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let p = s.random_point(&mut rng);
            let c = curvature_at(&s, &p, 1e-4).unwrap();
            for (kk, e) in c.frame.iter().enumerate() {
                let x = s.horizontal(&p, e.clone(), 1e-9).unwrap();
                let rx = ricci_from_generator(&s, &x);
                let numeric = c
                    .frame
                    .iter()
                    .enumerate()
                    .fold(DVector::zeros(6), |acc, (l, f)| acc + f * c.rho[(l, kk)]);
                assert!(
                    (rx.vec() - &numeric).norm() < 1e-5 * (1.0 + numeric.norm()),
                    "{class:?}"
                );
            }
        }
    }

    #[test]
    fn split_is_undefined_in_dimension_two() {
        let s = space(GeneratorClass::Hyperbolic { k: 1.0 }, 1);
        let c = curvature_at(&s, &s.base_point(), 1e-4).unwrap();
        assert!(c.w_part.is_none());
        assert_eq!(vaisman_split(&c).map(|_| ()), Err(Error::SplitUndefined));
        assert!(c.bianchi_residual() < 1e-7);
    }

    #[test]
    fn e_part_vanishes_for_zero_rho_and_contracts_to_ricci() {
        let w = crate::ambient::standard_matrix::<f64>(2);
        let e = ricci_type_tensor(&w, &DMatrix::zeros(4, 4));
        assert_eq!(e.max_abs(), 0.0);
        let s = space(GeneratorClass::Hyperbolic { k: 1.0 }, 2);
        let c = curvature_at(&s, &s.base_point(), 1e-4).unwrap();
        assert!(c.e_contraction_residual().unwrap() < 1e-8);
        assert!(c.w_trace_residual().unwrap() < 1e-7);
    }

    #[test]
    fn perturbed_connection_breaks_local_symmetry() {
        let s = space(GeneratorClass::Elliptic { k: 1.0, p: 2 }, 2);
        let p = s.base_point();
        let clean = local_symmetry_defect(&s, &p, 1e-4).unwrap();
        assert!(clean < 1e-5, "{clean:e}");
        let chart = FrameChart::new(&s, &p).unwrap().perturbed(0.5, 7).unwrap();
        let bad = symmetry_defect_of(&chart, &DVector::zeros(4), 1e-4).unwrap();
        assert!(bad > 1e-2, "{bad:e}");
        let sample = sample_connection(
            &chart,
            p.clone(),
            chart.frame().to_vec(),
            &DVector::zeros(4),
            1e-4,
        )
        .unwrap();
        assert!(sample.ricci_type_defect().unwrap() > 1e-3);
    }

    struct Flat(usize);
    impl ConnectionField<f64> for Flat {
        fn dim(&self) -> usize {
            self.0
        }
        fn christoffel(&self, _: &DVector<f64>) -> Result<Christoffel<f64>> {
            Ok(Christoffel::zeros(self.0))
        }
    }

    /// `omega = standard + d alpha` with a polynomial-trigonometric 1-form `alpha`.
    struct Perturbed(f64);
    impl FormField<f64> for Perturbed {
        fn omega_at(&self, s: &DVector<f64>) -> Result<DMatrix<f64>> {
            let e = self.0;
            // alpha = e (s1^2 s2 ds0 + sin(s0) s3 ds1 + s0 s2 ds3)
            let mut da = DMatrix::<f64>::zeros(4, 4);
            let mut add = |i: usize, j: usize, v: f64| {
                da[(i, j)] += v;
                da[(j, i)] -= v;
            };
            // (d alpha)_ij = d_i alpha_j - d_j alpha_i
            add(1, 0, e * 2.0 * s[1] * s[2]);
            add(2, 0, e * s[1] * s[1]);
            add(0, 1, e * s[0].cos() * s[3]);
            add(3, 1, e * s[0].sin());
            add(0, 3, e * s[2]);
            add(2, 3, e * s[0]);
            Ok(crate::ambient::standard_matrix::<f64>(2) + da)
        }
    }

    struct Adapter<'a>(&'a Symplectized<'a, f64>);
    impl FormField<f64> for Adapter<'_> {
        fn omega_at(&self, s: &DVector<f64>) -> Result<DMatrix<f64>> {
            self.0.omega_at(s)
        }
    }
    impl ConnectionField<f64> for Adapter<'_> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn christoffel(&self, s: &DVector<f64>) -> Result<Christoffel<f64>> {
            self.0.christoffel(s)
        }
    }

    #[test]
    fn symplectize_flat_connection_for_perturbed_form() {
        let omega = Perturbed(0.05);
        let flat = Flat(4);
        let s0 = DVector::from_vec(vec![0.1, -0.2, 0.3, 0.05]);
        let sym = symplectize(&omega, &flat, &s0, 1e-3, 1e-12).unwrap();
        let (tor, nab) = connection_residuals(&Adapter(&sym), &s0, 1e-3).unwrap();
        assert!(tor < 1e-12, "{tor:e}");
        assert!(nab < 1e-8, "{nab:e}");
    }

    #[test]
    fn symplectize_fixes_symplectic_connections_and_rejects_torsion() {
        let s = space(GeneratorClass::Hyperbolic { k: 1.0 }, 2);
        let chart = FrameChart::new(&s, &s.base_point()).unwrap();
        let s0 = DVector::zeros(4);
        let sym = symplectize(&chart, &chart, &s0, 1e-4, 1e-9).unwrap();
        let a = chart.christoffel(&s0).unwrap();
        let b = sym.christoffel(&s0).unwrap();
        let diff = Christoffel::lincomb(1.0, &a, -1.0, &b);
        assert!(diff.data.iter().all(|x| x.abs() < 1e-8));

        struct Twisted;
        impl ConnectionField<f64> for Twisted {
            fn dim(&self) -> usize {
                4
            }
            fn christoffel(&self, _: &DVector<f64>) -> Result<Christoffel<f64>> {
                let mut g = Christoffel::zeros(4);
                g.set(0, 1, 2, 1.0);
                Ok(g)
            }
        }
        let err = symplectize(&chart, &Twisted, &s0, 1e-4, 1e-9)
            .err()
            .unwrap();
        assert_eq!(err, Error::Torsion(1.0));
    }
}
