//! Symplectic linear algebra on R^{2n+2}: the standard form, sp membership,
//! classification of generators with A^2 = lambda Id, and adapted bases.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, bilinear, max_abs};
use crate::scalar::Real;

/// A nondegenerate antisymmetric form on R^{2n+2}.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm<T: Real> {
    dim: usize,
    matrix: DMatrix<T>,
    standard: bool,
}

impl<T: Real> SymplecticForm<T> {
    /// The standard form `[[0, Id], [-Id, 0]]` on R^{2n+2}.
    pub fn standard(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidDimension(format!("n must be >= 1, got {n}")));
        }
        let h = n + 1;
        Ok(Self {
            dim: 2 * h,
            matrix: standard_matrix(h),
            standard: true,
        })
    }

    /// Wraps an arbitrary matrix after checking antisymmetry and invertibility.
    pub fn from_matrix(matrix: DMatrix<T>, tol: T) -> Result<Self> {
        let dim = matrix.nrows();
        if matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.ncols(),
            });
        }
        if dim < 4 || dim % 2 == 1 {
            return Err(Error::InvalidDimension(format!(
                "ambient dimension {dim} must be even and >= 4"
            )));
        }
        let asym = max_abs(&(&matrix + matrix.transpose()));
        if asym > tol {
            return Err(Error::InvalidParameter(format!(
                "form is not antisymmetric (residual {:e})",
                asym.as_f64()
            )));
        }
        if linalg::rank(&matrix, tol) < dim {
            return Err(Error::InvalidParameter("form is degenerate".into()));
        }
        let standard = matrix == standard_matrix(dim / 2);
        Ok(Self {
            dim,
            matrix,
            standard,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `n` such that `dim = 2n + 2`.
    pub fn n(&self) -> usize {
        self.dim / 2 - 1
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    /// `Omega(x, y) = x^T Omega y`.
    #[inline]
    pub fn pair(&self, x: &DVector<T>, y: &DVector<T>) -> T {
        if self.standard {
            let h = self.dim / 2;
            let mut acc = T::zero();
            for i in 0..h {
                acc += x[i] * y[h + i] - x[h + i] * y[i];
            }
            acc
        } else {
            bilinear(&self.matrix, x, y)
        }
    }

    /// Gram matrix `Omega(v_i, v_j)` of a family.
    pub fn gram(&self, vs: &[DVector<T>]) -> DMatrix<T> {
        DMatrix::from_fn(vs.len(), vs.len(), |i, j| self.pair(&vs[i], &vs[j]))
    }

    /// Whether `b^T Omega b = Omega` within `tol`.
    pub fn is_symplectic_matrix(&self, b: &DMatrix<T>, tol: T) -> bool {
        b.shape() == (self.dim, self.dim)
            && max_abs(&(b.transpose() * &self.matrix * b - &self.matrix)) <= tol
    }
}

pub(crate) fn standard_matrix<T: Real>(h: usize) -> DMatrix<T> {
    let mut o = DMatrix::zeros(2 * h, 2 * h);
    for i in 0..h {
        o[(i, h + i)] = T::one();
        o[(h + i, i)] = -T::one();
    }
    o
}

/// Whether `A^T Omega + Omega A = 0` within `tol` (sup norm).
pub fn is_sp_element<T: Real>(omega: &SymplecticForm<T>, a: &DMatrix<T>, tol: T) -> Result<bool> {
    check_shape(omega, a)?;
    Ok(sp_residual(omega, a) <= tol)
}

pub(crate) fn sp_residual<T: Real>(omega: &SymplecticForm<T>, a: &DMatrix<T>) -> T {
    let o = omega.matrix();
    max_abs(&(a.transpose() * o + o * a))
}

fn check_shape<T: Real>(omega: &SymplecticForm<T>, a: &DMatrix<T>) -> Result<()> {
    if a.nrows() != omega.dim() {
        return Err(Error::DimensionMismatch {
            expected: omega.dim(),
            found: a.nrows(),
        });
    }
    if a.ncols() != omega.dim() {
        return Err(Error::DimensionMismatch {
            expected: omega.dim(),
            found: a.ncols(),
        });
    }
    Ok(())
}

/// An element `A` of sp(2n+2) with `A^2 = lambda Id`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T: Real> {
    a: DMatrix<T>,
    lambda: T,
}

impl<T: Real> Generator<T> {
    /// Validates `A`. Residuals are measured relative to `max(1, |A|)` and
    /// `max(1, |A|^2)` so that rescaled generators classify alike.
    pub fn new(omega: &SymplecticForm<T>, a: DMatrix<T>, tol: T) -> Result<Self> {
        check_shape(omega, &a)?;
        let scale = max_abs(&a);
        if scale == T::zero() {
            return Err(Error::ZeroGenerator);
        }
        let s1 = scale.max(T::one());
        let sp = sp_residual(omega, &a);
        if sp > tol * s1 {
            return Err(Error::NotInAlgebra(sp.as_f64()));
        }
        let a2 = &a * &a;
        let lambda = a2.trace() / T::count(omega.dim());
        let id = DMatrix::<T>::identity(omega.dim(), omega.dim());
        let res = max_abs(&(a2 - id * lambda));
        if res > tol * s1 * s1 {
            return Err(Error::NotSpaceForm(res.as_f64()));
        }
        Ok(Self { a, lambda })
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// The three families of generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorClass<T: Real> {
    /// `lambda = k^2`.
    Hyperbolic { k: T },
    /// `lambda = -k^2`, Hermitian signature `(p+1, n-p)`.
    Elliptic { k: T, p: usize },
    /// `lambda = 0`, `rank A = r`, `Omega(x, Ax)` of signature `(p, r-p)`, `2m = 2(n+1-r)`.
    Nilpotent { r: usize, p: usize, m: usize },
}

impl<T: Real> GeneratorClass<T> {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorClass::Hyperbolic { .. } => "hyperbolic",
            GeneratorClass::Elliptic { .. } => "elliptic",
            GeneratorClass::Nilpotent { .. } => "nilpotent",
        }
    }

    /// `lambda` of the class (0 for nilpotent).
    pub fn lambda(&self) -> T {
        match *self {
            GeneratorClass::Hyperbolic { k } => k * k,
            GeneratorClass::Elliptic { k, .. } => -k * k,
            GeneratorClass::Nilpotent { .. } => T::zero(),
        }
    }

    /// Same tag and integer invariants, `k` within `tol` (relative).
    pub fn same_as(&self, other: &Self, tol: T) -> bool {
        let close = |a: T, b: T| (a - b).abs() <= tol * a.abs().max(T::one());
        match (*self, *other) {
            (GeneratorClass::Hyperbolic { k: a }, GeneratorClass::Hyperbolic { k: b }) => {
                close(a, b)
            }
            (
                GeneratorClass::Elliptic { k: a, p: pa },
                GeneratorClass::Elliptic { k: b, p: pb },
            ) => pa == pb && close(a, b),
            (x @ GeneratorClass::Nilpotent { .. }, y @ GeneratorClass::Nilpotent { .. }) => x == y,
            _ => false,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match *self {
            GeneratorClass::Hyperbolic { k } | GeneratorClass::Elliptic { k, .. }
                if k <= T::zero() =>
            {
                Err(Error::InvalidParameter("k must be positive".into()))
            }
            GeneratorClass::Elliptic { p, .. } if p > n => Err(Error::InvalidParameter(format!(
                "elliptic p = {p} exceeds n = {n}"
            ))),
            GeneratorClass::Nilpotent { r, p, m }
                if r < 1 || r > n + 1 || p < 1 || p > r || m != n + 1 - r =>
            {
                Err(Error::InvalidParameter(format!(
                    "nilpotent invariants r = {r}, p = {p}, m = {m} out of range for n = {n}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Reads off the class of `A`.
pub fn classify_generator<T: Real>(
    omega: &SymplecticForm<T>,
    gen: &Generator<T>,
    tol: T,
) -> Result<GeneratorClass<T>> {
    let a = gen.matrix();
    let lambda = gen.lambda();
    let scale = max_abs(a).max(T::one());
    let n = omega.n();
    let rel = T::lit(1e-9);
    let class = if lambda > tol * scale * scale {
        GeneratorClass::Hyperbolic { k: lambda.sqrt() }
    } else if lambda < -tol * scale * scale {
        let k = (-lambda).sqrt();
        // Omega(x, J y) is symmetric and realizes the Hermitian form
        let h = omega.matrix() * a / k;
        let (pos, _, _) = linalg::signature(&h, rel);
        if pos < 2 {
            return Err(Error::IllegalInvariants(
                "Hermitian form has no positive directions; the level set is empty".into(),
            ));
        }
        GeneratorClass::Elliptic { k, p: pos / 2 - 1 }
    } else {
        let s = omega.matrix() * a;
        let (pos, neg, _) = linalg::signature(&s, rel);
        let r = pos + neg;
        if pos == 0 {
            return Err(Error::IllegalInvariants(
                "Omega(x, Ax) has no positive directions; the level set is empty".into(),
            ));
        }
        GeneratorClass::Nilpotent {
            r,
            p: pos,
            m: n + 1 - r,
        }
    };
    Ok(class)
}

/// A basis in which `A` and `Omega` take the normal form of their class.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedBasis<T: Real> {
    /// Columns are the adapted basis vectors in standard coordinates.
    pub t: DMatrix<T>,
    pub t_inv: DMatrix<T>,
    pub class: GeneratorClass<T>,
}

impl<T: Real> AdaptedBasis<T> {
    /// Symplectic change of basis `T T0^{-1}` carrying the standard-coordinate
    /// normal form of the class onto `A`. Equal to `T` except in the nilpotent
    /// case, where the normal-form coordinates `(a, v, w)` are not Darboux.
    pub fn to_standard(&self, n: usize) -> DMatrix<T> {
        let t0 = normal_embedding(n, &self.class);
        &self.t * t0.transpose()
    }
}

/// Hermitian signs `g = (1^{p+1}, (-1)^{n-p})`.
pub(crate) fn elliptic_signs<T: Real>(n: usize, p: usize) -> Vec<T> {
    (0..=n)
        .map(|j| if j <= p { T::one() } else { -T::one() })
        .collect()
}

/// Signs `G = Id_p + (-Id_{r-p})` of the nilpotent normal form.
pub(crate) fn nilpotent_signs<T: Real>(r: usize, p: usize) -> Vec<T> {
    (0..r)
        .map(|j| if j < p { T::one() } else { -T::one() })
        .collect()
}

/// `A` and `Omega` in the class's normal-form coordinates. For the hyperbolic and
/// elliptic classes these are standard Darboux coordinates; for the nilpotent
/// class the coordinates are `(a, v, w)` with blocks of sizes `r, r, 2m`.
pub fn normal_form<T: Real>(n: usize, class: &GeneratorClass<T>) -> (DMatrix<T>, DMatrix<T>) {
    let dim = 2 * n + 2;
    let h = n + 1;
    match *class {
        GeneratorClass::Hyperbolic { k } => {
            let a = DMatrix::from_fn(dim, dim, |i, j| {
                if i != j {
                    T::zero()
                } else if i < h {
                    k
                } else {
                    -k
                }
            });
            (a, standard_matrix(h))
        }
        GeneratorClass::Elliptic { k, p } => {
            let g = elliptic_signs::<T>(n, p);
            let o = standard_matrix::<T>(h);
            let hm = DMatrix::from_fn(dim, dim, |i, j| if i == j { g[i % h] } else { T::zero() });
            (-(o * hm) * k, standard_matrix(h))
        }
        GeneratorClass::Nilpotent { r, p, m } => {
            let g = nilpotent_signs::<T>(r, p);
            let mut a = DMatrix::zeros(dim, dim);
            let mut o = DMatrix::zeros(dim, dim);
            for i in 0..r {
                a[(i, r + i)] = T::one();
                o[(i, r + i)] = -g[i];
                o[(r + i, i)] = g[i];
            }
            for j in 0..m {
                o[(2 * r + j, 2 * r + m + j)] = T::one();
                o[(2 * r + m + j, 2 * r + j)] = -T::one();
            }
            (a, o)
        }
    }
}

/// Signed permutation from normal-form coordinates to standard Darboux
/// coordinates: `a_i -> -g_i e_i`, `v_i -> f_i`, `w_j -> e_{r+j}`, `w_{m+j} -> f_{r+j}`.
/// The identity outside the nilpotent class.
pub fn normal_embedding<T: Real>(n: usize, class: &GeneratorClass<T>) -> DMatrix<T> {
    let dim = 2 * n + 2;
    let h = n + 1;
    match *class {
        GeneratorClass::Nilpotent { r, p, m } => {
            let g = nilpotent_signs::<T>(r, p);
            let mut t = DMatrix::zeros(dim, dim);
            for i in 0..r {
                t[(i, i)] = -g[i];
                t[(h + i, r + i)] = T::one();
            }
            for j in 0..m {
                t[(r + j, 2 * r + j)] = T::one();
                t[(h + r + j, 2 * r + m + j)] = T::one();
            }
            t
        }
        _ => DMatrix::identity(dim, dim),
    }
}

/// The normal-form generator written in standard Darboux coordinates.
pub fn standard_normal_generator<T: Real>(
    n: usize,
    class: &GeneratorClass<T>,
) -> Result<DMatrix<T>> {
    class.validate(n)?;
    let (a_nf, _) = normal_form(n, class);
    let t0 = normal_embedding(n, class);
    Ok(&t0 * a_nf * t0.transpose())
}

/// Computes an adapted basis for `A`.
pub fn adapted_basis<T: Real>(
    omega: &SymplecticForm<T>,
    gen: &Generator<T>,
    tol: T,
) -> Result<AdaptedBasis<T>> {
    let class = classify_generator(omega, gen, tol)?;
    let n = omega.n();
    let dim = omega.dim();
    let a = gen.matrix();
    let o = omega.matrix();
    let small = T::lit(1e-10);
    let t = match class {
        GeneratorClass::Hyperbolic { k } => {
            let id = DMatrix::<T>::identity(dim, dim);
            let pp = (a + &id * k) / (k + k);
            let pm = (&id * k - a) / (k + k);
            let cols = |m: &DMatrix<T>| {
                (0..dim)
                    .map(|j| m.column(j).into_owned())
                    .collect::<Vec<_>>()
            };
            let u = linalg::column_basis(&cols(&pp), T::lit(1e-6));
            let v0 = linalg::column_basis(&cols(&pm), T::lit(1e-6));
            if u.len() != n + 1 || v0.len() != n + 1 {
                return Err(Error::Conditioning(format!(
                    "eigenspaces of dimensions {} and {}",
                    u.len(),
                    v0.len()
                )));
            }
            let um = DMatrix::from_columns(&u);
            let vm0 = DMatrix::from_columns(&v0);
            let pairing = um.transpose() * o * &vm0;
            let inv = pairing
                .try_inverse()
                .ok_or_else(|| Error::Conditioning("eigenspaces are not in duality".into()))?;
            let vm = vm0 * inv;
            let mut t = DMatrix::zeros(dim, dim);
            t.view_mut((0, 0), (dim, n + 1)).copy_from(&um);
            t.view_mut((0, n + 1), (dim, n + 1)).copy_from(&vm);
            t
        }
        GeneratorClass::Elliptic { k, .. } => {
            let j = a / k;
            let (frame, signs) = linalg::hermitian_frame(o, &j, &[], small)?;
            let mut t = DMatrix::zeros(dim, dim);
            for (c, (e, &g)) in frame.iter().zip(&signs).enumerate() {
                t.set_column(c, e);
                t.set_column(n + 1 + c, &(&j * e * T::lit(g as f64)));
            }
            t
        }
        GeneratorClass::Nilpotent { r, p, m } => nilpotent_basis(omega, a, r, p, m)?,
    };
    let t_inv = t
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Conditioning("adapted basis is singular".into()))?;
    let basis = AdaptedBasis { t, t_inv, class };
    let (a_nf, o_nf) = normal_form(n, &class);
    let scale = max_abs(a).max(T::one());
    let ra = max_abs(&(&basis.t_inv * a * &basis.t - a_nf));
    let ro = max_abs(&(basis.t.transpose() * o * &basis.t - o_nf));
    let check = T::lit(1e-6) * scale;
    if ra > check || ro > check {
        return Err(Error::Conditioning(format!(
            "normal form residuals {:e} (A), {:e} (Omega)",
            ra.as_f64(),
            ro.as_f64()
        )));
    }
    Ok(basis)
}

fn nilpotent_basis<T: Real>(
    omega: &SymplecticForm<T>,
    a: &DMatrix<T>,
    r: usize,
    p: usize,
    m: usize,
) -> Result<DMatrix<T>> {
    let dim = omega.dim();
    let o = omega.matrix();
    let s = o * a;
    let s = (&s + s.transpose()) * T::lit(0.5);
    let eig = SymmetricEigen::new(s.clone());
    let mut idx: Vec<usize> = (0..dim).collect();
    // positive eigenvalues first (descending), then negative (ascending)
    idx.sort_by(|&i, &j| {
        let (a, b) = (eig.eigenvalues[i], eig.eigenvalues[j]);
        b.partial_cmp(&a).unwrap_or(std::cmp::Ordering::Equal)
    });
    let pos: Vec<usize> = idx[..p].to_vec();
    let mut neg: Vec<usize> = idx[dim - (r - p)..].to_vec();
    neg.reverse();
    let mut vs = Vec::with_capacity(r);
    let mut g = Vec::with_capacity(r);
    for (set, sign) in [(&pos, T::one()), (&neg, -T::one())] {
        if set.is_empty() {
            continue;
        }
        // in-order basis of the eigenspace, then S-orthonormalized by M^{-1/2}
        let mut proj = DMatrix::<T>::zeros(dim, dim);
        for &i in set.iter() {
            let u = eig.eigenvectors.column(i);
            proj += &u * u.transpose();
        }
        let cols: Vec<DVector<T>> = (0..dim).map(|j| proj.column(j).into_owned()).collect();
        let basis = linalg::column_basis(&cols, T::lit(1e-6));
        if basis.len() != set.len() {
            return Err(Error::Conditioning(
                "eigenspace of Omega A has the wrong dimension".into(),
            ));
        }
        let u = DMatrix::from_columns(&basis);
        let mm = u.transpose() * &s * &u * sign;
        let me = SymmetricEigen::new((&mm + mm.transpose()) * T::lit(0.5));
        if me.eigenvalues.iter().any(|&x| x <= T::zero()) {
            return Err(Error::Conditioning(
                "Omega A is indefinite on an eigenspace".into(),
            ));
        }
        let inv_sqrt = &me.eigenvectors
            * DMatrix::from_diagonal(&me.eigenvalues.map(|x| T::one() / x.sqrt()))
            * me.eigenvectors.transpose();
        let v = u * inv_sqrt;
        for c in 0..set.len() {
            vs.push(v.column(c).into_owned());
            g.push(sign);
        }
    }
    // make span(v) isotropic without touching Omega(v_i, A v_j) = g_i delta_ij
    let avs: Vec<DVector<T>> = vs.iter().map(|v| a * v).collect();
    let mut vp = Vec::with_capacity(r);
    for vi in &vs {
        let mut w = vi.clone();
        for (l, vl) in vs.iter().enumerate() {
            let c = omega.pair(vi, vl) * g[l] * T::lit(0.5);
            w.axpy(c, &avs[l], T::one());
        }
        vp.push(w);
    }
    let av: Vec<DVector<T>> = vp.iter().map(|v| a * v).collect();
    let mut b_cols: Vec<DVector<T>> = av.clone();
    b_cols.extend(vp.iter().cloned());
    let bm = DMatrix::from_columns(&b_cols);
    let ob = bm.transpose() * o * &bm;
    let ob_inv = ob
        .try_inverse()
        .ok_or_else(|| Error::Conditioning("Ker/Image chain is degenerate".into()))?;
    let proj = DMatrix::<T>::identity(dim, dim) - &bm * ob_inv * bm.transpose() * o;
    let mut t = DMatrix::zeros(dim, dim);
    for i in 0..r {
        t.set_column(i, &av[i]);
        t.set_column(r + i, &vp[i]);
    }
    if m > 0 {
        let cands: Vec<DVector<T>> = (0..dim).map(|j| proj.column(j).into_owned()).collect();
        let darboux = linalg::symplectic_gram_schmidt(o, &cands, T::lit(1e-10))?;
        if darboux.len() != 2 * m {
            return Err(Error::Conditioning(format!(
                "complement has dimension {} instead of {}",
                darboux.len(),
                2 * m
            )));
        }
        for (j, d) in darboux.iter().enumerate() {
            t.set_column(2 * r + j, d);
        }
    }
    Ok(t)
}

/// Structured description of a generator: either a normal form or an explicit matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorSpec {
    Normal(NormalSpec),
    Matrix(MatrixSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalSpec {
    pub n: usize,
    pub case: CaseTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseTag {
    Hyperbolic,
    Elliptic,
    Nilpotent,
}

impl GeneratorSpec {
    /// The class requested by a normal-form spec (`None` for explicit matrices).
    pub fn class(&self) -> Result<Option<GeneratorClass<f64>>> {
        let GeneratorSpec::Normal(s) = self else {
            return Ok(None);
        };
        let need = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| Error::InvalidParameter(format!("{:?} spec needs '{name}'", s.case)))
        };
        let class = match s.case {
            CaseTag::Hyperbolic => GeneratorClass::Hyperbolic {
                k: s.k.unwrap_or(1.0),
            },
            CaseTag::Elliptic => GeneratorClass::Elliptic {
                k: s.k.unwrap_or(1.0),
                p: need(s.p, "p")?,
            },
            CaseTag::Nilpotent => {
                let r = need(s.r, "r")?;
                let p = need(s.p, "p")?;
                if r > s.n + 1 {
                    return Err(Error::InvalidParameter(format!("r = {r} exceeds n + 1")));
                }
                GeneratorClass::Nilpotent {
                    r,
                    p,
                    m: s.n + 1 - r,
                }
            }
        };
        class.validate(s.n)?;
        Ok(Some(class))
    }

    /// Builds the standard form and the generator.
    pub fn build(&self, tol: f64) -> Result<(SymplecticForm<f64>, Generator<f64>)> {
        match self {
            GeneratorSpec::Normal(s) => {
                let omega = SymplecticForm::standard(s.n)?;
                let class = self.class()?.expect("normal spec has a class");
                let a = standard_normal_generator(s.n, &class)?;
                Ok((omega.clone(), Generator::new(&omega, a, tol)?))
            }
            GeneratorSpec::Matrix(m) => {
                let dim = m.matrix.len();
                if dim < 4 || dim % 2 == 1 {
                    return Err(Error::InvalidDimension(format!("matrix of size {dim}")));
                }
                if let Some(row) = m.matrix.iter().find(|row| row.len() != dim) {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: row.len(),
                    });
                }
                let a = DMatrix::from_fn(dim, dim, |i, j| m.matrix[i][j]);
                let omega = SymplecticForm::standard(dim / 2 - 1)?;
                Ok((omega.clone(), Generator::new(&omega, a, tol)?))
            }
        }
    }

    /// Explicit-matrix spec of a generator.
    pub fn from_generator(gen: &Generator<f64>) -> Self {
        let a = gen.matrix();
        GeneratorSpec::Matrix(MatrixSpec {
            matrix: (0..a.nrows())
                .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_sp_conjugator(dim: usize, seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let s = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-0.4..0.4));
        let s = &s + s.transpose();
        let o = standard_matrix::<f64>(dim / 2);
        (-(o * s)).exp()
    }

    fn classes(n: usize) -> Vec<GeneratorClass<f64>> {
        let mut out = vec![GeneratorClass::Hyperbolic { k: 1.3 }];
        for p in 0..=n {
            out.push(GeneratorClass::Elliptic { k: 0.7, p });
        }
        for r in 1..=n + 1 {
            for p in 1..=r {
                out.push(GeneratorClass::Nilpotent { r, p, m: n + 1 - r });
            }
        }
        out
    }

    #[test]
    fn standard_form_blocks() {
        let o = SymplecticForm::<f64>::standard(1).unwrap();
        let expect = DMatrix::from_row_slice(
            4,
            4,
            &[
                0., 0., 1., 0., //
                0., 0., 0., 1., //
                -1., 0., 0., 0., //
                0., -1., 0., 0.,
            ],
        );
        assert_eq!(o.matrix(), &expect);
        let o2 = SymplecticForm::<f64>::standard(2).unwrap();
        let sq = o2.matrix() * o2.matrix();
        assert_eq!(sq, -DMatrix::identity(6, 6));
        let o3 = SymplecticForm::<f64>::standard(3).unwrap();
        assert_eq!(o3.matrix().transpose(), -o3.matrix());
        assert!((o3.matrix().clone().determinant() - 1.0).abs() < 1e-12);
        assert!(matches!(
            SymplecticForm::<f64>::standard(0),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn sp_membership() {
        let o = SymplecticForm::<f64>::standard(2).unwrap();
        let hyp = standard_normal_generator(2, &GeneratorClass::Hyperbolic { k: 2.0 }).unwrap();
        assert!(is_sp_element(&o, &hyp, 1e-12).unwrap());
        assert!(!is_sp_element(&o, &DMatrix::identity(6, 6), 1e-12).unwrap());
        let s = DMatrix::from_fn(6, 6, |i, j| (i + j) as f64 * 0.1 + (i * j) as f64);
        let a = o.matrix().clone().try_inverse().unwrap() * s;
        assert!(is_sp_element(&o, &a, 1e-12).unwrap());
        assert!(is_sp_element(&o, &DMatrix::identity(4, 4), 1e-12).is_err());
    }

    #[test]
    fn generator_validation() {
        let o = SymplecticForm::<f64>::standard(1).unwrap();
        assert_eq!(
            Generator::new(&o, DMatrix::zeros(4, 4), 1e-9),
            Err(Error::ZeroGenerator)
        );
        assert!(matches!(
            Generator::new(&o, DMatrix::identity(4, 4), 1e-9),
            Err(Error::NotInAlgebra(_))
        ));
        // diag(1, 2, -1, -2) is in sp but A^2 is not scalar
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, -1.0, -2.0]));
        assert!(matches!(
            Generator::new(&o, a, 1e-9),
            Err(Error::NotSpaceForm(_))
        ));
    }

    #[test]
    fn classification_of_normal_forms() {
        let n = 2;
        let o = SymplecticForm::<f64>::standard(n).unwrap();
        for class in classes(n) {
            let a = standard_normal_generator(n, &class).unwrap();
            let g = Generator::new(&o, a, 1e-12).unwrap();
            let got = classify_generator(&o, &g, 1e-9).unwrap();
            assert!(got.same_as(&class, 1e-12), "{got:?} vs {class:?}");
        }
        // k J with Omega(x, Ax) positive definite is elliptic with p = n
        let kj = -o.matrix() * 1.5;
        let g = Generator::new(&o, kj, 1e-12).unwrap();
        assert!(classify_generator(&o, &g, 1e-9)
            .unwrap()
            .same_as(&GeneratorClass::Elliptic { k: 1.5, p: 2 }, 1e-12));
    }

    #[test]
    fn negative_definite_nilpotent_rejected() {
        let o = SymplecticForm::<f64>::standard(1).unwrap();
        let a =
            -standard_normal_generator(1, &GeneratorClass::Nilpotent { r: 2, p: 2, m: 0 }).unwrap();
        let g = Generator::new(&o, a, 1e-12).unwrap();
        assert!(matches!(
            classify_generator(&o, &g, 1e-9),
            Err(Error::IllegalInvariants(_))
        ));
    }

    #[test]
    fn adapted_basis_of_normal_forms_is_identity() {
        let n = 2;
        let o = SymplecticForm::<f64>::standard(n).unwrap();
        for class in classes(n) {
            let a = standard_normal_generator(n, &class).unwrap();
            let g = Generator::new(&o, a, 1e-12).unwrap();
            let b = adapted_basis(&o, &g, 1e-9).unwrap();
            let dev = max_abs(&(b.to_standard(n) - DMatrix::identity(6, 6)));
            assert!(dev < 1e-10, "{class:?}: {dev:e}");
        }
    }

    #[test]
    fn case3_r1_p1_block_form() {
        let n = 2;
        let o = SymplecticForm::<f64>::standard(n).unwrap();
        let class = GeneratorClass::Nilpotent { r: 1, p: 1, m: 2 };
        let b0 = random_sp_conjugator(6, 11);
        let a =
            &b0 * standard_normal_generator(n, &class).unwrap() * b0.clone().try_inverse().unwrap();
        let g = Generator::new(&o, a, 1e-9).unwrap();
        let b = adapted_basis(&o, &g, 1e-9).unwrap();
        // Omega in (a, v, w): [[0, -G, 0], [G, 0, 0], [0, 0, Omega']]
        let expect = DMatrix::from_row_slice(
            6,
            6,
            &[
                0., -1., 0., 0., 0., 0., //
                1., 0., 0., 0., 0., 0., //
                0., 0., 0., 0., 1., 0., //
                0., 0., 0., 0., 0., 1., //
                0., 0., -1., 0., 0., 0., //
                0., 0., 0., -1., 0., 0.,
            ],
        );
        assert!(max_abs(&(b.t.transpose() * o.matrix() * &b.t - expect)) < 1e-9);
    }

    #[test]
    fn spec_round_trip() {
        let text = r#"{"n": 2, "case": "elliptic", "k": 2.0, "p": 1}"#;
        let spec: GeneratorSpec = serde_json::from_str(text).unwrap();
        let (_, g) = spec.build(1e-9).unwrap();
        let back = serde_json::to_string(&GeneratorSpec::from_generator(&g)).unwrap();
        let spec2: GeneratorSpec = serde_json::from_str(&back).unwrap();
        let (_, g2) = spec2.build(1e-9).unwrap();
        assert!(max_abs(&(g.matrix() - g2.matrix())) <= 1e-12);
        assert!(
            serde_json::from_str::<GeneratorSpec>(r#"{"n": 2, "case": "elliptic", "kk": 1}"#)
                .is_err()
        );
        let bad: GeneratorSpec =
            serde_json::from_str(r#"{"n": 2, "case": "nilpotent", "r": 4, "p": 1}"#).unwrap();
        assert!(bad.build(1e-9).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn conjugation_preserves_class_and_basis_recovers_normal_form(seed in 0u64..10_000, n in 2usize..4, pick in 0usize..64) {
            let cs = classes(n);
            let class = cs[pick % cs.len()];
            let dim = 2 * n + 2;
            let o = SymplecticForm::<f64>::standard(n).unwrap();
            let b0 = random_sp_conjugator(dim, seed);
            let a = &b0 * standard_normal_generator(n, &class).unwrap() * b0.clone().try_inverse().unwrap();
            let g = Generator::new(&o, a.clone(), 1e-9).unwrap();
            let got = classify_generator(&o, &g, 1e-9).unwrap();
            prop_assert!(got.same_as(&class, 1e-8), "{:?} vs {:?}", got, class);
            let basis = adapted_basis(&o, &g, 1e-9).unwrap();
            let (a_nf, o_nf) = normal_form(n, &class);
            prop_assert!(max_abs(&(&basis.t_inv * &a * &basis.t - a_nf)) < 1e-8);
            prop_assert!(max_abs(&(basis.t.transpose() * o.matrix() * &basis.t - o_nf)) < 1e-8);
            prop_assert!(o.is_symplectic_matrix(&basis.to_standard(n), 1e-8));
        }
    }
}
