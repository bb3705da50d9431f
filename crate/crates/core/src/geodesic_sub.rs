//! Totally geodesic symplectic submanifolds `S = (Sigma_A ∩ W) / exp(tA)` for
//! `A`-stable symplectic subspaces `W` containing a lift of the base point.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ambient::{classify_generator, Generator, GeneratorClass, SymplecticForm};
use crate::error::{Error, Result};
use crate::group::{self, act, GroupElement};
use crate::linalg::{self, column_basis};
use crate::model::{HorizontalVector, ModelPoint, ModelSpace};
use crate::scalar::Real;

/// Orbit invariants of a submanifold of dimension `2q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "lowercase", deny_unknown_fields)]
pub enum OrbitInvariants {
    Hyperbolic { q: usize },
    Elliptic { q: usize, p: usize },
    Nilpotent { q: usize, r: usize, p: usize },
}

impl OrbitInvariants {
    pub fn q(&self) -> usize {
        match *self {
            Self::Hyperbolic { q } | Self::Elliptic { q, .. } | Self::Nilpotent { q, .. } => q,
        }
    }

    /// `m' = q + 1 - r'` in the nilpotent case.
    pub fn m(&self) -> Option<usize> {
        match *self {
            Self::Nilpotent { q, r, .. } => (q + 1).checked_sub(r),
            _ => None,
        }
    }

    /// Checks the ranges allowed inside a space of the given class.
    /// Returns `true` when an elliptic request sits on the boundary
    /// `p' = min(p, q)` of a mixed-signature space.
    pub fn validate<T: Real>(&self, n: usize, class: &GeneratorClass<T>) -> Result<bool> {
        let q = self.q();
        if q > n {
            return Err(Error::IllegalInvariants(format!("q = {q} exceeds n = {n}")));
        }
        let bad = |msg: String| Err(Error::IllegalInvariants(msg));
        match (*self, *class) {
            (Self::Hyperbolic { .. }, GeneratorClass::Hyperbolic { .. }) => Ok(false),
            (Self::Elliptic { p: pq, .. }, GeneratorClass::Elliptic { p, .. }) => {
                let lo = q.saturating_sub(n - p);
                let hi = p.min(q);
                if pq < lo || pq > hi {
                    return bad(format!("p' = {pq} outside [{lo}, {hi}]"));
                }
                Ok(p < n && pq == hi && hi > 0)
            }
            (Self::Nilpotent { r: rq, p: pq, .. }, GeneratorClass::Nilpotent { r, p, m }) => {
                if rq < 1 || pq < 1 || pq > rq {
                    return bad(format!("need 1 <= p' <= r', got r' = {rq}, p' = {pq}"));
                }
                if rq > q + 1 || pq > p || rq - pq > r - p || q + 1 - rq > m {
                    return bad(format!(
                        "(q, r', p') = ({q}, {rq}, {pq}) does not fit (r, p, m) = ({r}, {p}, {m})"
                    ));
                }
                Ok(false)
            }
            _ => bad("case of the invariants differs from the space".into()),
        }
    }
}

/// `S` through `base`, with `W` given by an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSubmanifold<T: Real> {
    w_basis: Vec<DVector<T>>,
    base: ModelPoint<T>,
    q: usize,
    invariants: OrbitInvariants,
}

/// `{"W_basis": [[...]], "base": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmanifoldRecord {
    #[serde(rename = "W_basis")]
    pub w_basis: Vec<Vec<f64>>,
    pub base: Vec<f64>,
}

/// The space form carried by `W`, with the Darboux embedding `D` (columns in
/// the ambient space).
#[derive(Debug, Clone)]
pub struct InducedModel<T: Real> {
    pub space: ModelSpace<T>,
    pub embedding: DMatrix<T>,
}

impl<T: Real> GeodesicSubmanifold<T> {
    pub fn w_basis(&self) -> &[DVector<T>] {
        &self.w_basis
    }

    pub fn base(&self) -> &ModelPoint<T> {
        &self.base
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn invariants(&self) -> OrbitInvariants {
        self.invariants
    }

    /// Orthogonal projection onto `W`.
    pub fn project(&self, x: &DVector<T>) -> DVector<T> {
        self.w_basis
            .iter()
            .fold(DVector::zeros(x.len()), |acc, e| acc + e * e.dot(x))
    }

    /// `|x - P_W x| / |x|`.
    pub fn residual(&self, x: &DVector<T>) -> T {
        (x - self.project(x)).norm() / x.norm().max(T::tiny())
    }
}

impl GeodesicSubmanifold<f64> {
    pub fn record(&self) -> SubmanifoldRecord {
        SubmanifoldRecord {
            w_basis: self
                .w_basis
                .iter()
                .map(|v| v.iter().copied().collect())
                .collect(),
            base: self.base.rep().iter().copied().collect(),
        }
    }
}

fn build<T: Real>(
    space: &ModelSpace<T>,
    base: &ModelPoint<T>,
    spanning: &[DVector<T>],
    tol: T,
) -> Result<GeodesicSubmanifold<T>> {
    let w_basis = column_basis(spanning, T::lit(1e-10));
    if w_basis.len() % 2 != 0 || w_basis.len() < 2 {
        return Err(Error::NotSymplectic);
    }
    let q = w_basis.len() / 2 - 1;
    let mut s = GeodesicSubmanifold {
        w_basis,
        base: base.clone(),
        q,
        invariants: OrbitInvariants::Hyperbolic { q },
    };
    validate(space, &s, tol)?;
    s.invariants = compute_invariants(space, &s)?;
    Ok(s)
}

/// Checks the submanifold invariants: `x, Ax` in `W`, `AW ⊆ W`, `Omega|_W` nondegenerate.
pub fn validate<T: Real>(space: &ModelSpace<T>, s: &GeodesicSubmanifold<T>, tol: T) -> Result<()> {
    let x = s.base.rep();
    let ax = space.a() * x;
    let scale = T::one().max(linalg::max_abs(space.a()));
    let mut stab = s.residual(x).max(s.residual(&ax));
    for e in &s.w_basis {
        let ae = space.a() * e;
        stab = stab.max((&ae - s.project(&ae)).norm() / scale);
    }
    if stab > tol {
        return Err(Error::NotStable(stab.as_f64()));
    }
    let gram = space.omega().gram(&s.w_basis);
    let pf = linalg::pfaffian_abs(&gram);
    if !(pf > T::lit(1e-8)) {
        return Err(Error::NotSymplectic);
    }
    Ok(())
}

/// `W = span(V_bar) + R x + R Ax` for an `A`-stable symplectic `V` at `p`.
pub fn submanifold_from_tangent<T: Real>(
    space: &ModelSpace<T>,
    p: &ModelPoint<T>,
    vs: &[HorizontalVector<T>],
    tol: T,
) -> Result<GeodesicSubmanifold<T>> {
    if vs.iter().any(|v| v.base() != p) {
        return Err(Error::BaseMismatch);
    }
    let vecs: Vec<DVector<T>> = vs.iter().map(|v| v.vec().clone()).collect();
    if !vecs.is_empty() {
        let darboux = linalg::symplectic_gram_schmidt(space.omega().matrix(), &vecs, T::lit(1e-10))
            .map_err(|_| Error::NotSymplectic)?;
        let span = column_basis(&vecs, T::lit(1e-10));
        if darboux.len() != span.len() {
            return Err(Error::NotSymplectic);
        }
        let scale = T::one().max(linalg::max_abs(space.a()));
        let mut res = T::zero();
        for v in &span {
            let av = space.hproj_at(p.rep(), &(space.a() * v));
            let proj = span
                .iter()
                .fold(DVector::zeros(av.len()), |acc, e| acc + e * e.dot(&av));
            res = res.max((&av - proj).norm() / scale);
        }
        if res > tol {
            return Err(Error::NotStable(res.as_f64()));
        }
    }
    let mut spanning = vecs;
    spanning.push(p.rep().clone());
    spanning.push(space.a() * p.rep());
    build(space, p, &spanning, tol.max(T::lit(1e-9)))
}

/// Horizontal part of `W` at the base point, as an orthonormal basis.
pub fn tangent_space<T: Real>(
    space: &ModelSpace<T>,
    s: &GeodesicSubmanifold<T>,
) -> Vec<DVector<T>> {
    let h: Vec<DVector<T>> = s
        .w_basis
        .iter()
        .map(|e| space.hproj_at(s.base.rep(), e))
        .collect();
    column_basis(&h, T::lit(1e-9))
}

/// Whether `p` lies on `S` (the component through the base point).
pub fn contains<T: Real>(
    space: &ModelSpace<T>,
    s: &GeodesicSubmanifold<T>,
    p: &ModelPoint<T>,
    tol: T,
) -> bool {
    if s.q == 0 {
        return space.points_equal(p, &s.base, tol);
    }
    // W is exp(tA)-stable, so one representative decides
    if s.residual(p.rep()) > tol {
        return false;
    }
    match s.invariants {
        OrbitInvariants::Nilpotent { p: 1, .. } => {
            space.pair(p.rep(), &(space.a() * s.base.rep())) > T::zero()
        }
        _ => true,
    }
}

/// The space form on `W`.
pub fn induced_model<T: Real>(
    space: &ModelSpace<T>,
    s: &GeodesicSubmanifold<T>,
) -> Result<InducedModel<T>> {
    if s.q == 0 {
        return Err(Error::InvalidDimension(
            "a point carries no model space".into(),
        ));
    }
    let (omega_w, a_w, d) = restrict(space, s)?;
    let gen = Generator::new(&omega_w, a_w, T::lit(1e-8))?;
    let induced = ModelSpace::new(omega_w, gen, space.tol().max(T::lit(1e-9)))?;
    Ok(InducedModel {
        space: induced,
        embedding: d,
    })
}

fn restrict<T: Real>(
    space: &ModelSpace<T>,
    s: &GeodesicSubmanifold<T>,
) -> Result<(SymplecticForm<T>, DMatrix<T>, DMatrix<T>)> {
    let cols = linalg::symplectic_gram_schmidt(space.omega().matrix(), &s.w_basis, T::lit(1e-10))?;
    let d = DMatrix::from_columns(&cols);
    let omega_w = SymplecticForm::standard(s.q)?;
    let lhs: DMatrix<T> = d.transpose() * space.omega().matrix() * space.a() * &d;
    // Omega_std^{-1} = -Omega_std
    let a_w: DMatrix<T> = -(omega_w.matrix() * &lhs);
    Ok((omega_w, a_w, d))
}

fn compute_invariants<T: Real>(
    space: &ModelSpace<T>,
    s: &GeodesicSubmanifold<T>,
) -> Result<OrbitInvariants> {
    let q = s.q;
    if q == 0 {
        return Ok(match space.class() {
            GeneratorClass::Hyperbolic { .. } => OrbitInvariants::Hyperbolic { q },
            GeneratorClass::Elliptic { .. } => OrbitInvariants::Elliptic { q, p: 0 },
            GeneratorClass::Nilpotent { .. } => OrbitInvariants::Nilpotent { q, r: 1, p: 1 },
        });
    }
    let (omega_w, a_w, _) = restrict(space, s)?;
    let gen = Generator::new(&omega_w, a_w, T::lit(1e-8))?;
    Ok(match classify_generator(&omega_w, &gen, T::lit(1e-8))? {
        GeneratorClass::Hyperbolic { .. } => OrbitInvariants::Hyperbolic { q },
        GeneratorClass::Elliptic { p, .. } => OrbitInvariants::Elliptic { q, p },
        GeneratorClass::Nilpotent { r, p, .. } => OrbitInvariants::Nilpotent { q, r, p },
    })
}

/// Orbit invariants of `S`.
pub fn orbit_invariants<T: Real>(
    space: &ModelSpace<T>,
    s: &GeodesicSubmanifold<T>,
) -> Result<OrbitInvariants> {
    compute_invariants(space, s)
}

/// `B . S`: basis `B W`, base `B . base`.
pub fn act_on_submanifold<T: Real>(
    space: &ModelSpace<T>,
    b: &GroupElement<T>,
    s: &GeodesicSubmanifold<T>,
) -> Result<GeodesicSubmanifold<T>> {
    let moved: Vec<DVector<T>> = s.w_basis.iter().map(|e| b.matrix() * e).collect();
    let base = act(space, b, &s.base)?;
    let w_basis = column_basis(&moved, T::lit(1e-10));
    let out = GeodesicSubmanifold {
        w_basis,
        base,
        q: s.q,
        invariants: s.invariants,
    };
    validate(space, &out, T::lit(1e-7))?;
    Ok(out)
}

/// Coordinate submanifold of the adapted basis with the given invariants.
pub fn reference_submanifold<T: Real>(
    space: &ModelSpace<T>,
    inv: OrbitInvariants,
) -> Result<GeodesicSubmanifold<T>> {
    let n = space.n();
    let class = space.class();
    inv.validate(n, &class)?;
    let h = n + 1;
    let q = inv.q();
    let t = &space.basis().t;
    let col = |j: usize| t.column(j).into_owned();
    let mut cols: Vec<DVector<T>> = Vec::new();
    match (inv, class) {
        (OrbitInvariants::Hyperbolic { .. }, _) => {
            for j in 0..=q {
                cols.push(col(j));
                cols.push(col(h + j));
            }
        }
        (OrbitInvariants::Elliptic { p: pq, .. }, GeneratorClass::Elliptic { p, .. }) => {
            let idx = (0..=pq).chain(p + 1..p + 1 + (q - pq));
            for j in idx {
                cols.push(col(j));
                cols.push(col(h + j));
            }
        }
        (
            OrbitInvariants::Nilpotent { r: rq, p: pq, .. },
            GeneratorClass::Nilpotent { r, p, m },
        ) => {
            let mq = q + 1 - rq;
            for i in (0..pq).chain(p..p + (rq - pq)) {
                cols.push(col(i));
                cols.push(col(r + i));
            }
            for j in 0..mq {
                cols.push(col(2 * r + j));
                cols.push(col(2 * r + m + j));
            }
        }
        _ => {
            return Err(Error::IllegalInvariants(
                "case of the invariants differs from the space".into(),
            ))
        }
    }
    build(space, &space.base_point(), &cols, T::lit(1e-8))
}

/// Random submanifold in the orbit with the given invariants: the reference
/// submanifold moved by a sampled group element (Haar on `SU(n+1)` when the
/// group is compact). Logs a warning for boundary requests `p' = min(p, q)` in
/// the mixed-signature elliptic case.
pub fn random_submanifold<T: Real, R: Rng + ?Sized>(
    space: &ModelSpace<T>,
    inv: OrbitInvariants,
    basis: &[DMatrix<T>],
    rng: &mut R,
) -> Result<GeodesicSubmanifold<T>> {
    if inv.validate(space.n(), &space.class())? {
        log::warn!("p' = min(p, q) sits on the boundary of the admissible range");
    }
    let reference = reference_submanifold(space, inv)?;
    let b = match space.class() {
        GeneratorClass::Elliptic { p, .. } if p == space.n() => group::haar_su(space, rng)?,
        _ => group::random_group_element(space, basis, rng),
    };
    act_on_submanifold(space, &b, &reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize, c: GeneratorClass<f64>) -> ModelSpace<f64> {
        ModelSpace::from_class(n, c, 1e-9).unwrap()
    }

    fn full_tangent(s: &ModelSpace<f64>, p: &ModelPoint<f64>) -> Vec<HorizontalVector<f64>> {
        s.horizontal_basis(p)
            .unwrap()
            .into_iter()
            .map(|v| s.horizontal(p, v, 1e-8).unwrap())
            .collect()
    }

    #[test]
    fn full_tangent_space_gives_the_whole_space() {
        let s = space(2, GeneratorClass::Elliptic { k: 1.0, p: 2 });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = s.random_point(&mut rng);
        let sub = submanifold_from_tangent(&s, &p, &full_tangent(&s, &p), 1e-8).unwrap();
        assert_eq!(sub.q(), 2);
        assert_eq!(sub.w_basis().len(), 6);
        let ind = induced_model(&s, &sub).unwrap();
        assert!(ind.space.class().same_as(&s.class(), 1e-8));
        assert_eq!(
            orbit_invariants(&s, &sub).unwrap(),
            OrbitInvariants::Elliptic { q: 2, p: 2 }
        );
    }

    #[test]
    fn complex_line_in_cp2() {
        let s = space(2, GeneratorClass::Elliptic { k: 1.0, p: 2 });
        let p = s.base_point();
        let e = s.horizontal_project(&p, &DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]));
        let je = s.horizontal_project(&p, &(s.a() * e.vec()));
        let sub = submanifold_from_tangent(&s, &p, &[e.clone(), je], 1e-8).unwrap();
        assert_eq!(sub.invariants(), OrbitInvariants::Elliptic { q: 1, p: 1 });
        // a real 2-plane that is not J-stable
        let f = s.horizontal_project(&p, &DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]));
        let err = submanifold_from_tangent(&s, &p, &[e, f], 1e-8).unwrap_err();
        assert!(matches!(err, Error::NotStable(_) | Error::NotSymplectic));
    }

    #[test]
    fn hyperbolic_eigenvector_pair() {
        let s = space(2, GeneratorClass::Hyperbolic { k: 1.0 });
        let p = s.base_point();
        let u = s.horizontal_project(&p, &DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]));
        let v = s.horizontal_project(&p, &DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
        let sub = submanifold_from_tangent(&s, &p, &[u, v], 1e-8).unwrap();
        assert_eq!(sub.invariants(), OrbitInvariants::Hyperbolic { q: 1 });
        assert!(contains(&s, &sub, &p, 1e-9));
        let ind = induced_model(&s, &sub).unwrap();
        assert!(ind
            .space
            .class()
            .same_as(&GeneratorClass::Hyperbolic { k: 1.0 }, 1e-8));
    }

    #[test]
    fn reference_submanifolds_have_requested_invariants() {
        let cases = [
            (
                3,
                GeneratorClass::Hyperbolic { k: 1.0 },
                OrbitInvariants::Hyperbolic { q: 2 },
            ),
            (
                3,
                GeneratorClass::Elliptic { k: 1.0, p: 1 },
                OrbitInvariants::Elliptic { q: 2, p: 1 },
            ),
            (
                3,
                GeneratorClass::Elliptic { k: 1.0, p: 1 },
                OrbitInvariants::Elliptic { q: 2, p: 0 },
            ),
            (
                3,
                GeneratorClass::Nilpotent { r: 3, p: 2, m: 1 },
                OrbitInvariants::Nilpotent { q: 2, r: 2, p: 1 },
            ),
            (
                3,
                GeneratorClass::Nilpotent { r: 3, p: 2, m: 1 },
                OrbitInvariants::Nilpotent { q: 1, r: 1, p: 1 },
            ),
        ];
        for (n, c, inv) in cases {
            let s = space(n, c);
            let sub = reference_submanifold(&s, inv).unwrap();
            assert_eq!(orbit_invariants(&s, &sub).unwrap(), inv);
            assert_eq!(tangent_space(&s, &sub).len(), 2 * inv.q());
        }
    }

    #[test]
    fn illegal_invariants_rejected() {
        let s = space(2, GeneratorClass::Elliptic { k: 1.0, p: 1 });
        assert!(reference_submanifold(&s, OrbitInvariants::Elliptic { q: 2, p: 0 }).is_err());
        assert!(reference_submanifold(&s, OrbitInvariants::Hyperbolic { q: 1 }).is_err());
        assert_eq!(
            OrbitInvariants::Elliptic { q: 1, p: 1 }.validate(2, &s.class()),
            Ok(true)
        );
        let nil = space(2, GeneratorClass::Nilpotent { r: 1, p: 1, m: 2 });
        assert!(OrbitInvariants::Nilpotent { q: 1, r: 2, p: 1 }
            .validate(2, &nil.class())
            .is_err());
    }

    #[test]
    fn random_submanifolds_keep_invariants_and_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, c, inv) in [
            (
                2,
                GeneratorClass::Elliptic { k: 1.0, p: 2 },
                OrbitInvariants::Elliptic { q: 1, p: 1 },
            ),
            (
                2,
                GeneratorClass::Nilpotent { r: 3, p: 1, m: 0 },
                OrbitInvariants::Nilpotent { q: 1, r: 2, p: 1 },
            ),
        ] {
            let s = space(n, c);
            let basis = group::algebra_basis(&s);
            let sub = random_submanifold(&s, inv, &basis, &mut rng).unwrap();
            assert_eq!(orbit_invariants(&s, &sub).unwrap(), inv);
            assert!(contains(&s, &sub, sub.base(), 1e-9));
            let off = s.random_point(&mut rng);
            assert!(!contains(&s, &sub, &off, 1e-6));
        }
    }

    #[test]
    fn record_field_names() {
        let s = space(1, GeneratorClass::Hyperbolic { k: 1.0 });
        let sub = reference_submanifold(&s, OrbitInvariants::Hyperbolic { q: 1 }).unwrap();
        let json = serde_json::to_string(&sub.record()).unwrap();
        assert!(json.starts_with("{\"W_basis\":"));
        let inv = serde_json::to_string(&OrbitInvariants::Nilpotent { q: 1, r: 1, p: 1 }).unwrap();
        assert_eq!(inv, "{\"case\":\"nilpotent\",\"q\":1,\"r\":1,\"p\":1}");
    }
}
