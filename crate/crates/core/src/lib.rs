//! Reduced models of Ricci-type symplectic symmetric spaces.
//!
//! A generator `A` in sp(2n+2) with `A^2 = lambda Id` defines the level set
//! `Sigma_A = {Omega(x, Ax) = 1}`; its quotient by `exp tA` is a symplectic
//! symmetric space `M_A` of dimension `2n` with a Ricci-type connection. The
//! crate builds these spaces, checks their geometry numerically, constructs
//! their totally geodesic symplectic submanifolds and integrates Radon
//! transforms over orbits of such submanifolds.
//!
//! Geometry is generic over [`Real`] (`f32` or `f64`); the aliases at the crate
//! root fix `f64`. The Radon module works in `f64`.

pub mod ambient;
pub mod curvature;
pub mod error;
pub mod geodesic_sub;
pub mod group;
pub mod linalg;
pub mod model;
pub mod radon;
pub mod scalar;

pub use ambient::{
    adapted_basis, classify_generator, is_sp_element, AdaptedBasis, CaseTag, Generator,
    GeneratorClass, GeneratorSpec, SymplecticForm,
};
pub use curvature::{
    curvature_at, local_symmetry_defect, ricci_from_generator, symplectize, vaisman_split,
    CurvatureReport,
};
pub use error::{Error, Result};
pub use geodesic_sub::{
    contains, induced_model, orbit_invariants, random_submanifold, submanifold_from_tangent,
    OrbitInvariants,
};
pub use group::{act, fundamental_field, moment, AlgebraElement, GroupElement};
pub use model::{Chart, HorizontalVector, ModelPoint, ModelSpace};
pub use radon::{dual_radon, radon, DensityFunction, DensitySpec, Estimate, QuadratureScheme};
pub use scalar::{Real, DEFAULT_TOL};

pub type Space = model::ModelSpace<f64>;
pub type Point = model::ModelPoint<f64>;
pub type Tangent = model::HorizontalVector<f64>;
pub type Class = ambient::GeneratorClass<f64>;
pub type Sample = curvature::CurvatureSample<f64>;
pub type Submanifold = geodesic_sub::GeodesicSubmanifold<f64>;
pub type Group = group::GroupElement<f64>;
pub type Algebra = group::AlgebraElement<f64>;
