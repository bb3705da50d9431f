//! The automorphism group of `M_A` (the identity component of the centralizer
//! of `A` in `Sp(Omega)`), its action, fundamental fields and moment maps.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ambient::{nilpotent_signs, standard_matrix, GeneratorClass};
use crate::error::{Error, Result};
use crate::linalg::{self, max_abs};
use crate::model::{HorizontalVector, ModelPoint, ModelSpace};
use crate::scalar::Real;

/// Standard deviation of the Gaussian coefficients used by the sampler.
pub const SAMPLER_SIGMA: f64 = 0.3;

/// Element of the centralizer algebra of `A` in `sp(Omega)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement<T: Real> {
    d: DMatrix<T>,
}

/// Element of the automorphism group, built from exponentials.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement<T: Real> {
    b: DMatrix<T>,
}

/// Serialized group element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub matrix: Vec<Vec<f64>>,
}

fn scaled(res: f64, m: f64) -> f64 {
    res / m.max(1.0)
}

impl<T: Real> AlgebraElement<T> {
    pub fn new(space: &ModelSpace<T>, d: DMatrix<T>, tol: T) -> Result<Self> {
        let res = algebra_residual(space, &d);
        if res > tol * max_abs(&d).max(T::one()) {
            return Err(Error::NotInGroup(res.as_f64()));
        }
        Ok(Self { d })
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.d
    }

    /// `exp(D)`.
    pub fn exp(&self) -> GroupElement<T> {
        GroupElement {
            b: self.d.clone().exp(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self { d: &self.d * s }
    }
}

fn algebra_residual<T: Real>(space: &ModelSpace<T>, d: &DMatrix<T>) -> T {
    let o = space.omega().matrix();
    let a = space.a();
    max_abs(&(d.transpose() * o + o * d)).max(max_abs(&(d * a - a * d)))
}

impl<T: Real> GroupElement<T> {
    pub fn identity(space: &ModelSpace<T>) -> Self {
        let dim = space.ambient_dim();
        Self {
            b: DMatrix::identity(dim, dim),
        }
    }

    /// Validates `B^T Omega B = Omega` and `BA = AB`. Membership in the identity
    /// component is not checked; elements built by the crate are exponentials.
    pub fn new(space: &ModelSpace<T>, b: DMatrix<T>, tol: T) -> Result<Self> {
        let o = space.omega().matrix();
        let a = space.a();
        let m = max_abs(&b).as_f64();
        let r1 = max_abs(&(b.transpose() * o * &b - o)).as_f64();
        let r2 = max_abs(&(&b * a - a * &b)).as_f64();
        let res = scaled(r1, m * m).max(scaled(r2, m * max_abs(a).as_f64()));
        if res > tol.as_f64() {
            return Err(Error::NotInGroup(res));
        }
        Ok(Self { b })
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.b
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            b: &self.b * &other.b,
        }
    }

    pub fn inverse(&self, space: &ModelSpace<T>) -> Self {
        // B^{-1} = Omega^{-1} B^T Omega
        let o = space.omega().matrix();
        let o_inv = -o.clone();
        Self {
            b: o_inv * self.b.transpose() * o,
        }
    }

    /// Largest violation of the group invariants, relative to `|B|^2`.
    pub fn residual(&self, space: &ModelSpace<T>) -> T {
        let o = space.omega().matrix();
        let a = space.a();
        let m = max_abs(&self.b).max(T::one());
        max_abs(&(self.b.transpose() * o * &self.b - o)).max(max_abs(&(&self.b * a - a * &self.b)))
            / (m * m)
    }
}

impl GroupElement<f64> {
    pub fn record(&self) -> GroupRecord {
        GroupRecord {
            matrix: self
                .b
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        }
    }
}

/// Orthonormal basis of the centralizer algebra, by null-space extraction of
/// `D -> (D^T Omega + Omega D, DA - AD)`.
pub fn algebra_basis<T: Real>(space: &ModelSpace<T>) -> Vec<DMatrix<T>> {
    let dim = space.ambient_dim();
    let o = space.omega().matrix();
    let a = space.a();
    let nvar = dim * dim;
    let mut m = DMatrix::<T>::zeros(2 * nvar, nvar);
    for col in 0..nvar {
        let (i, j) = (col % dim, col / dim);
        let mut e = DMatrix::<T>::zeros(dim, dim);
        e[(i, j)] = T::one();
        let c1 = e.transpose() * o + o * &e;
        let c2 = &e * a - a * &e;
        for r in 0..nvar {
            m[(r, col)] = c1[(r % dim, r / dim)];
            m[(nvar + r, col)] = c2[(r % dim, r / dim)];
        }
    }
    let scale = max_abs(a).max(T::one());
    linalg::null_space(&m, T::lit(1e-10) * scale)
        .into_iter()
        .map(|v| DMatrix::from_column_slice(dim, dim, v.as_slice()))
        .collect()
}

/// `sum xi_i b_i` with `xi_i ~ N(0, SAMPLER_SIGMA^2)`.
pub fn random_algebra_element<T: Real, R: Rng + ?Sized>(
    space: &ModelSpace<T>,
    basis: &[DMatrix<T>],
    rng: &mut R,
) -> AlgebraElement<T> {
    let dim = space.ambient_dim();
    let mut d = DMatrix::zeros(dim, dim);
    for b in basis {
        let xi: f64 = rng.sample(StandardNormal);
        d += b * T::lit(xi * SAMPLER_SIGMA);
    }
    AlgebraElement { d }
}

/// `exp(D)` for a sampled algebra element.
pub fn random_group_element<T: Real, R: Rng + ?Sized>(
    space: &ModelSpace<T>,
    basis: &[DMatrix<T>],
    rng: &mut R,
) -> GroupElement<T> {
    random_algebra_element(space, basis, rng).exp()
}

/// `pi(B x)`.
pub fn act<T: Real>(
    space: &ModelSpace<T>,
    b: &GroupElement<T>,
    p: &ModelPoint<T>,
) -> Result<ModelPoint<T>> {
    let x = &b.b * p.rep();
    space.normalize(&x)
}

/// Pushes a tangent vector by `B`.
pub fn act_vector<T: Real>(
    space: &ModelSpace<T>,
    b: &GroupElement<T>,
    x: &HorizontalVector<T>,
) -> Result<HorizontalVector<T>> {
    let moved = &b.b * x.base().rep();
    let (q, tau) = space.canonicalize(&moved, space.tol().max(T::lit(1e-8)))?;
    Ok(space.push_vector(&(&b.b * x.vec()), tau, &q))
}

/// Fundamental field `d/dt exp(-tD) . p` at `t = 0`.
pub fn fundamental_field<T: Real>(
    space: &ModelSpace<T>,
    d: &AlgebraElement<T>,
    p: &ModelPoint<T>,
) -> HorizontalVector<T> {
    space.horizontal_project(p, &-(&d.d * p.rep()))
}

/// `f_D(pi(x)) = Omega(x, Dx) / 2`.
pub fn moment<T: Real>(space: &ModelSpace<T>, p: &ModelPoint<T>, d: &AlgebraElement<T>) -> T {
    space.pair(p.rep(), &(&d.d * p.rep())) * T::lit(0.5)
}

/// `|f_D(B p) - f_{B^{-1} D B}(p)|`.
pub fn equivariance_defect<T: Real>(
    space: &ModelSpace<T>,
    b: &GroupElement<T>,
    d: &AlgebraElement<T>,
    p: &ModelPoint<T>,
) -> Result<T> {
    let bp = act(space, b, p)?;
    let binv = b.inverse(space);
    let conj = AlgebraElement {
        d: &binv.b * &d.d * &b.b,
    };
    Ok((moment(space, &bp, d) - moment(space, p, &conj)).abs())
}

/// Moment map into `sl(n+1, R)`: `(1/(2(n+1))) (-u v^T + (u.v)/(n+1) Id)` in
/// adapted coordinates `(u, v)`.
pub fn sl_moment<T: Real>(space: &ModelSpace<T>, p: &ModelPoint<T>) -> Result<DMatrix<T>> {
    if !matches!(space.class(), GeneratorClass::Hyperbolic { .. }) {
        return Err(Error::WrongCase {
            expected: "hyperbolic",
        });
    }
    let h = space.n() + 1;
    let y = space.adapted_coords(p.rep());
    let u = y.rows(0, h).into_owned();
    let v = y.rows(h, h).into_owned();
    let hn = T::count(h);
    let id = DMatrix::<T>::identity(h, h);
    Ok((-(&u * v.transpose()) + id * (u.dot(&v) / hn)) / (hn + hn))
}

/// `C` with `D = T diag(C, -C^T) T^{-1}` for a hyperbolic-case algebra element.
pub fn sl_block<T: Real>(space: &ModelSpace<T>, d: &AlgebraElement<T>) -> Result<DMatrix<T>> {
    if !matches!(space.class(), GeneratorClass::Hyperbolic { .. }) {
        return Err(Error::WrongCase {
            expected: "hyperbolic",
        });
    }
    let h = space.n() + 1;
    let b = space.basis();
    let dn = &b.t_inv * &d.d * &b.t;
    Ok(dn.view((0, 0), (h, h)).into_owned())
}

/// `diag(C, -C^T)` in adapted coordinates, carried to the ambient space.
pub fn sl_element<T: Real>(space: &ModelSpace<T>, c: &DMatrix<T>) -> Result<AlgebraElement<T>> {
    if !matches!(space.class(), GeneratorClass::Hyperbolic { .. }) {
        return Err(Error::WrongCase {
            expected: "hyperbolic",
        });
    }
    let h = space.n() + 1;
    let mut dn = DMatrix::zeros(2 * h, 2 * h);
    dn.view_mut((0, 0), (h, h)).copy_from(c);
    dn.view_mut((h, h), (h, h)).copy_from(&(-c.transpose()));
    let b = space.basis();
    Ok(AlgebraElement {
        d: &b.t * dn * &b.t_inv,
    })
}

fn elliptic_signs_of<T: Real>(space: &ModelSpace<T>) -> Result<(T, Vec<T>)> {
    match space.class() {
        GeneratorClass::Elliptic { k, p } => Ok((k, crate::ambient::elliptic_signs(space.n(), p))),
        _ => Err(Error::WrongCase {
            expected: "elliptic",
        }),
    }
}

/// Complex coordinates `z_j = a_j + i g_j b_j` of a point.
pub fn complex_coords<T: Real>(
    space: &ModelSpace<T>,
    x: &DVector<T>,
) -> Result<DVector<Complex<T>>> {
    let (_, g) = elliptic_signs_of(space)?;
    let h = space.n() + 1;
    let y = space.adapted_coords(x);
    Ok(DVector::from_fn(h, |j, _| {
        Complex::new(y[j], g[j] * y[h + j])
    }))
}

/// Moment map into `su(p+1, n-p)`: `(-i/2) z <., z> + (i <z, z> / (2(n+1))) Id`.
pub fn su_moment<T: Real>(space: &ModelSpace<T>, p: &ModelPoint<T>) -> Result<DMatrix<Complex<T>>> {
    let (_, g) = elliptic_signs_of(space)?;
    let h = space.n() + 1;
    let z = complex_coords(space, p.rep())?;
    let half = T::lit(0.5);
    let zz = (0..h).fold(T::zero(), |acc, j| acc + g[j] * z[j].norm_sqr());
    let i = Complex::new(T::zero(), T::one());
    Ok(DMatrix::from_fn(h, h, |a, b| {
        let mut v = i * z[a] * z[b].conj() * Complex::new(-half * g[b], T::zero());
        if a == b {
            v += i * Complex::new(zz / (T::count(2 * h)), T::zero());
        }
        v
    }))
}

/// Real ambient matrix of the complex-linear map `z -> C z` in the elliptic case.
pub fn realify<T: Real>(space: &ModelSpace<T>, c: &DMatrix<Complex<T>>) -> Result<DMatrix<T>> {
    let (_, g) = elliptic_signs_of(space)?;
    let h = space.n() + 1;
    let mut m = DMatrix::zeros(2 * h, 2 * h);
    for a in 0..h {
        for b in 0..h {
            let (re, im) = (c[(a, b)].re, c[(a, b)].im);
            // in (a, G b): [[Re, -Im], [Im, Re]], conjugated by diag(I, G)
            m[(a, b)] = re;
            m[(a, h + b)] = -im * g[b];
            m[(h + a, b)] = g[a] * im;
            m[(h + a, h + b)] = g[a] * re * g[b];
        }
    }
    let basis = space.basis();
    Ok(&basis.t * m * &basis.t_inv)
}

/// Haar-distributed element of `SU(n+1)` (elliptic case with `p = n`), realified.
pub fn haar_su<T: Real, R: Rng + ?Sized>(
    space: &ModelSpace<T>,
    rng: &mut R,
) -> Result<GroupElement<T>> {
    let u = haar_unitary_matrix(space, rng)?;
    Ok(GroupElement {
        b: realify(space, &u)?,
    })
}

/// The complex matrix behind [`haar_su`].
pub fn haar_unitary_matrix<T: Real, R: Rng + ?Sized>(
    space: &ModelSpace<T>,
    rng: &mut R,
) -> Result<DMatrix<Complex<T>>> {
    match space.class() {
        GeneratorClass::Elliptic { p, .. } if p == space.n() => {}
        GeneratorClass::Elliptic { .. } => {
            return Err(Error::Unsupported(
                "Haar sampling needs a compact group (p = n)".into(),
            ))
        }
        _ => {
            return Err(Error::WrongCase {
                expected: "elliptic",
            })
        }
    }
    let h = space.n() + 1;
    Ok(haar_special_unitary(h, rng))
}

/// Haar `SU(h)` by QR of a complex Gaussian matrix with phase correction.
pub fn haar_special_unitary<T: Real, R: Rng + ?Sized>(
    h: usize,
    rng: &mut R,
) -> DMatrix<Complex<T>> {
    let u = haar_unitary(h, rng);
    let det: Complex<T> = u.clone().determinant();
    let phase = det.im.atan2(det.re) / T::count(h);
    let fix = Complex::new(phase.cos(), -phase.sin());
    u * fix
}

/// Haar `U(h)`.
pub fn haar_unitary<T: Real, R: Rng + ?Sized>(h: usize, rng: &mut R) -> DMatrix<Complex<T>> {
    let g = DMatrix::from_fn(h, h, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(T::lit(re), T::lit(im))
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..h {
        let d = r[(j, j)];
        let n = d.norm_sqr().sqrt();
        if n > T::zero() {
            let ph = d / Complex::new(n, T::zero());
            for i in 0..h {
                q[(i, j)] *= ph;
            }
        }
    }
    q
}

/// Components `(b, c, u, s)` of a nilpotent-case algebra element, in the
/// normal-form coordinates `(a, v, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Case3Components<T: Real> {
    /// `r x r`, antisymmetric for `g`.
    pub b: DMatrix<T>,
    /// `2m x 2m`, in `sp(Omega')`.
    pub c: DMatrix<T>,
    /// `r x 2m`.
    pub u: DMatrix<T>,
    /// `r x r`, symmetric.
    pub s: DMatrix<T>,
}

fn nilpotent_dims<T: Real>(space: &ModelSpace<T>) -> Result<(usize, usize, usize)> {
    match space.class() {
        GeneratorClass::Nilpotent { r, p, m } => Ok((r, p, m)),
        _ => Err(Error::WrongCase {
            expected: "nilpotent",
        }),
    }
}

impl<T: Real> Case3Components<T> {
    /// Reads the components off `T^{-1} D T`.
    pub fn decompose(space: &ModelSpace<T>, d: &AlgebraElement<T>) -> Result<Self> {
        let (r, p, m) = nilpotent_dims(space)?;
        let basis = space.basis();
        let dn = &basis.t_inv * &d.d * &basis.t;
        let g = DMatrix::from_diagonal(&DVector::from_vec(nilpotent_signs::<T>(r, p)));
        let op = standard_matrix::<T>(m);
        let w0 = 2 * r;
        Ok(Self {
            b: dn.view((0, 0), (r, r)).into_owned(),
            s: &g * dn.view((0, r), (r, r)),
            u: -(dn.view((0, w0), (r, 2 * m)) * &op),
            c: dn.view((w0, w0), (2 * m, 2 * m)).into_owned(),
        })
    }

    /// Algebra element with these components.
    pub fn embed(&self, space: &ModelSpace<T>) -> Result<AlgebraElement<T>> {
        let (r, p, m) = nilpotent_dims(space)?;
        let g = DMatrix::from_diagonal(&DVector::from_vec(nilpotent_signs::<T>(r, p)));
        let op = standard_matrix::<T>(m);
        let dim = space.ambient_dim();
        let w0 = 2 * r;
        let u1 = &self.u * &op;
        let mut dn = DMatrix::zeros(dim, dim);
        dn.view_mut((0, 0), (r, r)).copy_from(&self.b);
        dn.view_mut((r, r), (r, r)).copy_from(&self.b);
        dn.view_mut((0, r), (r, r)).copy_from(&(&g * &self.s));
        dn.view_mut((0, w0), (r, 2 * m)).copy_from(&u1);
        dn.view_mut((w0, r), (2 * m, r))
            .copy_from(&(-(&op * u1.transpose() * &g)));
        dn.view_mut((w0, w0), (2 * m, 2 * m)).copy_from(&self.c);
        let basis = space.basis();
        AlgebraElement::new(space, &basis.t * dn * &basis.t_inv, T::lit(1e-8))
    }
}

/// `-g(a, b v) + s(v, v)/2 + g(v, u Omega' w) + Omega'(w, c w)/2` at `pi(a, v, w)`.
pub fn case3_moment<T: Real>(
    space: &ModelSpace<T>,
    p: &ModelPoint<T>,
    el: &Case3Components<T>,
) -> Result<T> {
    let (r, pp, m) = nilpotent_dims(space)?;
    let g = DMatrix::from_diagonal(&DVector::from_vec(nilpotent_signs::<T>(r, pp)));
    let op = standard_matrix::<T>(m);
    let y = space.adapted_coords(p.rep());
    let a = y.rows(0, r).into_owned();
    let v = y.rows(r, r).into_owned();
    let w = y.rows(2 * r, 2 * m).into_owned();
    let half = T::lit(0.5);
    let t1 = -(a.transpose() * &g * &el.b * &v)[0];
    let t2 = (v.transpose() * &el.s * &v)[0] * half;
    let t3 = (v.transpose() * &g * &el.u * &op * &w)[0];
    let t4 = (w.transpose() * &op * &el.c * &w)[0] * half;
    Ok(t1 + t2 + t3 + t4)
}

/// A group element `B` with `B . p = q`.
pub fn transport<T: Real>(
    space: &ModelSpace<T>,
    p: &ModelPoint<T>,
    q: &ModelPoint<T>,
) -> Result<GroupElement<T>> {
    let basis = space.basis();
    let h = space.n() + 1;
    let yp = space.adapted_coords(p.rep());
    let yq = space.adapted_coords(q.rep());
    let bn = match space.class() {
        GeneratorClass::Hyperbolic { .. } => {
            let (u, v) = (yp.rows(0, h).into_owned(), yp.rows(h, h).into_owned());
            let (u2, v2) = (yq.rows(0, h).into_owned(), yq.rows(h, h).into_owned());
            let pm = frame_with(&u, &v);
            let mut qm = frame_with(&u2, &v2);
            let pinv = pm
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::DegenerateFrame("transport frame".into()))?;
            let mut c = &qm * &pinv;
            if c.determinant() < T::zero() {
                let last = h - 1;
                for i in 0..h {
                    qm[(i, last)] = -qm[(i, last)];
                }
                c = &qm * pinv;
            }
            let cit = c
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::DegenerateFrame("transport map".into()))?
                .transpose();
            let mut bn = DMatrix::zeros(2 * h, 2 * h);
            bn.view_mut((0, 0), (h, h)).copy_from(&c);
            bn.view_mut((h, h), (h, h)).copy_from(&cit);
            bn
        }
        GeneratorClass::Elliptic { k, .. } => {
            let j = space.a() / k;
            let o = space.omega().matrix();
            let tol = T::lit(1e-9);
            let sk = k.sqrt();
            let (fp, sp) = linalg::hermitian_frame(o, &j, &[p.rep() * sk], tol)?;
            let (fq, sq) = linalg::hermitian_frame(o, &j, &[q.rep() * sk], tol)?;
            if sp != sq {
                return Err(Error::DegenerateFrame(
                    "Hermitian frames have different signatures".into(),
                ));
            }
            let cols = |f: &[DVector<T>]| {
                let mut v: Vec<DVector<T>> = f.to_vec();
                v.extend(f.iter().map(|e| &j * e));
                DMatrix::from_columns(&v)
            };
            let (mp, mq) = (cols(&fp), cols(&fq));
            let inv = mp
                .try_inverse()
                .ok_or_else(|| Error::DegenerateFrame("Hermitian frame".into()))?;
            return GroupElement::new(space, mq * inv, T::lit(1e-7));
        }
        GeneratorClass::Nilpotent { r, p: pp, m } => nilpotent_transport(r, pp, m, &yp, &yq)?,
    };
    GroupElement::new(space, &basis.t * bn * &basis.t_inv, T::lit(1e-7))
}

/// Columns `[u, n_2, .., n_h]` with `n_i` a basis of `v^perp`.
fn frame_with<T: Real>(u: &DVector<T>, v: &DVector<T>) -> DMatrix<T> {
    let h = u.len();
    let vn = v / v.norm();
    let mut cols = vec![u.clone()];
    let cands: Vec<DVector<T>> = (0..h)
        .map(|i| {
            let e = DVector::from_fn(h, |r, _| if r == i { T::one() } else { T::zero() });
            &e - &vn * vn[i]
        })
        .collect();
    cols.extend(
        linalg::column_basis(&cands, T::lit(1e-10))
            .into_iter()
            .take(h - 1),
    );
    DMatrix::from_columns(&cols)
}

fn nilpotent_transport<T: Real>(
    r: usize,
    p: usize,
    m: usize,
    yp: &DVector<T>,
    yq: &DVector<T>,
) -> Result<DMatrix<T>> {
    let g = nilpotent_signs::<T>(r, p);
    let gd =
        |x: &DVector<T>, y: &DVector<T>| (0..r).fold(T::zero(), |acc, i| acc + g[i] * x[i] * y[i]);
    let dim = 2 * r + 2 * m;
    let blockdiag = |beta: &DMatrix<T>| {
        let mut b = DMatrix::identity(dim, dim);
        b.view_mut((0, 0), (r, r)).copy_from(beta);
        b.view_mut((r, r), (r, r)).copy_from(beta);
        b
    };
    let reflection = |u: &DVector<T>| {
        let gu = DVector::from_fn(r, |i, _| g[i] * u[i]);
        DMatrix::identity(r, r) - u * gu.transpose() * (T::lit(2.0) / gd(u, u))
    };
    let rotate = |v: &DVector<T>, v2: &DVector<T>| reflection(&(v + v2)) * reflection(v);
    let v = yp.rows(r, r).into_owned();
    let v2 = yq.rows(r, r).into_owned();
    // SO_0(G) step, through an intermediate unit vector when v, v2 are nearly opposite
    let ok = |x: &DVector<T>, y: &DVector<T>| gd(x, y) > T::lit(-0.5);
    let beta = if ok(&v, &v2) {
        rotate(&v, &v2)
    } else {
        // a positive unit vector g-orthogonal to v, signed towards v2
        let comp: Vec<DVector<T>> = (0..r)
            .map(|j| {
                let e = DVector::from_fn(r, |i, _| if i == j { T::one() } else { T::zero() });
                &e - &v * gd(&e, &v)
            })
            .collect();
        let gram = DMatrix::from_fn(r, r, |i, j| gd(&comp[i], &comp[j]));
        let eig = gram.symmetric_eigen();
        let top = eig.eigenvalues.imax();
        if !(eig.eigenvalues[top] > T::lit(1e-12)) {
            return Err(Error::DegenerateFrame(
                "no intermediate vector for the rotation".into(),
            ));
        }
        let w = comp
            .iter()
            .enumerate()
            .fold(DVector::zeros(r), |acc, (i, b)| {
                acc + b * eig.eigenvectors[(i, top)]
            });
        let mut mid = &w / gd(&w, &w).sqrt();
        if gd(&mid, &v2) < T::zero() {
            mid = -mid;
        }
        rotate(&mid, &v2) * rotate(&v, &mid)
    };
    let b1 = blockdiag(&beta);
    let y1 = &b1 * yp;
    // u-step: moves w onto the target
    let delta = yq.rows(2 * r, 2 * m) - y1.rows(2 * r, 2 * m);
    let op = standard_matrix::<T>(m);
    let gm = DMatrix::from_diagonal(&DVector::from_vec(g.clone()));
    let u1 = -(&v2 * (delta.transpose() * &op));
    let mut d2 = DMatrix::zeros(dim, dim);
    d2.view_mut((0, 2 * r), (r, 2 * m)).copy_from(&u1);
    d2.view_mut((2 * r, r), (2 * m, r))
        .copy_from(&(-(&op * u1.transpose() * &gm)));
    let b2 = DMatrix::identity(dim, dim) + &d2 + &d2 * &d2 * T::lit(0.5);
    let y2 = &b2 * &y1;
    // s-step: moves a onto the target
    let z = yq.rows(0, r) - y2.rows(0, r);
    let gz = &gm * z;
    let e = &v2 / v2.norm_squared();
    let s = &gz * e.transpose() + &e * gz.transpose() - &e * e.transpose() * gz.dot(&v2);
    let mut d3 = DMatrix::zeros(dim, dim);
    d3.view_mut((0, r), (r, r)).copy_from(&(&gm * s));
    let b3 = DMatrix::identity(dim, dim) + d3;
    Ok(b3 * b2 * b1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spaces() -> Vec<ModelSpace<f64>> {
        [
            (2, GeneratorClass::Hyperbolic { k: 1.0 }),
            (2, GeneratorClass::Elliptic { k: 1.0, p: 2 }),
            (2, GeneratorClass::Elliptic { k: 2.0, p: 1 }),
            (2, GeneratorClass::Nilpotent { r: 3, p: 1, m: 0 }),
            (2, GeneratorClass::Nilpotent { r: 2, p: 2, m: 1 }),
            (3, GeneratorClass::Nilpotent { r: 1, p: 1, m: 3 }),
        ]
        .into_iter()
        .map(|(n, c)| ModelSpace::<f64>::from_class(n, c, 1e-9).unwrap())
        .collect()
    }

    #[test]
    fn algebra_dimensions() {
        // gl(3), u(3), u(2,1)
        let dims: Vec<usize> = spaces()
            .iter()
            .take(3)
            .map(|s| algebra_basis(s).len())
            .collect();
        assert_eq!(dims, vec![9, 9, 9]);
    }

    #[test]
    fn sampled_elements_preserve_the_level_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in spaces() {
            let basis = algebra_basis(&s);
            for _ in 0..5 {
                let b = random_group_element(&s, &basis, &mut rng);
                assert!(b.residual(&s) < 1e-9);
                let p = s.random_point(&mut rng);
                let bx = b.matrix() * p.rep();
                assert!((s.level(&bx) - 1.0).abs() < 1e-9);
                assert!(act(&s, &b, &p).is_ok());
            }
        }
    }

    #[test]
    fn exp_a_acts_trivially() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for s in spaces() {
            let p = s.random_point(&mut rng);
            let b = GroupElement { b: s.exp_a(0.7) };
            assert!(s.points_equal(&act(&s, &b, &p).unwrap(), &p, 1e-9));
            let d = AlgebraElement { d: s.a().clone() };
            assert!(fundamental_field(&s, &d, &p).vec().norm() < 1e-12);
            assert!((moment(&s, &p, &d) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn moment_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for s in spaces() {
            let basis = algebra_basis(&s);
            let b = random_group_element(&s, &basis, &mut rng);
            let d = random_algebra_element(&s, &basis, &mut rng);
            let p = s.random_point(&mut rng);
            assert!(equivariance_defect(&s, &b, &d, &p).unwrap() < 1e-9);
        }
    }

    #[test]
    fn sl_moment_at_base_and_pairing() {
        let s =
            ModelSpace::<f64>::from_class(2, GeneratorClass::Hyperbolic { k: 2.0 }, 1e-9).unwrap();
        let j = sl_moment(&s, &s.base_point()).unwrap();
        let c = 1.0 / (4.0 * 2.0 * 9.0);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0 * c, -c, -c]));
        assert!((j - expected).abs().max() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = s.random_point(&mut rng);
        let jp = sl_moment(&s, &p).unwrap();
        assert!(jp.trace().abs() < 1e-12);
        let mut cm = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let tr = cm.trace() / 3.0;
        for i in 0..3 {
            cm[(i, i)] -= tr;
        }
        let d = sl_element(&s, &cm).unwrap();
        assert!((sl_block(&s, &d).unwrap() - &cm).abs().max() < 1e-12);
        assert!((6.0 * (&jp * &cm).trace() - moment(&s, &p, &d)).abs() < 1e-10);
    }

    #[test]
    fn su_moment_at_base_and_pairing() {
        let s = ModelSpace::<f64>::from_class(2, GeneratorClass::Elliptic { k: 1.0, p: 2 }, 1e-9)
            .unwrap();
        let j = su_moment(&s, &s.base_point()).unwrap();
        let c = 1.0 / 6.0;
        for (a, want) in [(0, -2.0 * c), (1, c), (2, c)] {
            assert!((j[(a, a)] - Complex::new(0.0, want)).norm() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = s.random_point(&mut rng);
        let jp = su_moment(&s, &p).unwrap();
        assert!(jp.trace().norm() < 1e-12);
        // random traceless anti-Hermitian C
        let x = DMatrix::from_fn(3, 3, |_, _| {
            Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let mut cm = &x - x.adjoint();
        let tr = cm.trace() / Complex::new(3.0, 0.0);
        for i in 0..3 {
            cm[(i, i)] -= tr;
        }
        let d = AlgebraElement::new(&s, realify(&s, &cm).unwrap(), 1e-9).unwrap();
        let pair = (&jp * &cm).trace();
        assert!(pair.im.abs() < 1e-12);
        assert!((pair.re - moment(&s, &p, &d)).abs() < 1e-10);
    }

    #[test]
    fn case3_moment_matches_generic_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for s in spaces().into_iter().skip(3) {
            let basis = algebra_basis(&s);
            let d = random_algebra_element(&s, &basis, &mut rng);
            let comps = Case3Components::decompose(&s, &d).unwrap();
            let back = comps.embed(&s).unwrap();
            assert!((back.matrix() - d.matrix()).abs().max() < 1e-9);
            let p = s.random_point(&mut rng);
            assert!((case3_moment(&s, &p, &comps).unwrap() - moment(&s, &p, &d)).abs() < 1e-9);
        }
        let s =
            ModelSpace::<f64>::from_class(2, GeneratorClass::Nilpotent { r: 3, p: 1, m: 0 }, 1e-9)
                .unwrap();
        let mut s11 = DMatrix::zeros(3, 3);
        s11[(0, 0)] = 1.0;
        let el = Case3Components {
            b: DMatrix::zeros(3, 3),
            c: DMatrix::zeros(0, 0),
            u: DMatrix::zeros(3, 0),
            s: s11,
        };
        assert!((case3_moment(&s, &s.base_point(), &el).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn haar_samples_are_special_unitary() {
        let s = ModelSpace::<f64>::from_class(2, GeneratorClass::Elliptic { k: 1.0, p: 2 }, 1e-9)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let u = haar_unitary_matrix(&s, &mut rng).unwrap();
        assert!((u.adjoint() * &u - DMatrix::identity(3, 3)).norm() < 1e-12);
        assert!((u.determinant() - Complex::new(1.0, 0.0)).norm() < 1e-12);
        let b = haar_su(&s, &mut rng).unwrap();
        assert!(b.residual(&s) < 1e-12);
        let s2 = ModelSpace::<f64>::from_class(2, GeneratorClass::Elliptic { k: 1.0, p: 1 }, 1e-9)
            .unwrap();
        assert!(haar_su(&s2, &mut rng).is_err());
    }

    #[test]
    fn transport_hits_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for s in spaces() {
            for _ in 0..5 {
                let p = s.random_point(&mut rng);
                let q = s.random_point(&mut rng);
                let b = transport(&s, &p, &q).unwrap();
                let bp = act(&s, &b, &p).unwrap();
                assert!(s.points_equal(&bp, &q, 1e-8), "{:?}", s.class());
            }
        }
    }
}
