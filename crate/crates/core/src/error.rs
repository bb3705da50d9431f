use thiserror::Error;

/// Errors raised by the geometric and integration routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("generator is the zero matrix")]
    ZeroGenerator,
    #[error("matrix is not in the symplectic Lie algebra (residual {0:e})")]
    NotInAlgebra(f64),
    #[error("A^2 is not a multiple of the identity (residual {0:e})")]
    NotSpaceForm(f64),
    #[error("ill-conditioned eigenstructure: {0}")]
    Conditioning(String),
    #[error("point is off the level set (|Omega(x,Ax) - 1| = {0:e})")]
    OffLevelSet(f64),
    #[error("point lies in the discarded connected component")]
    WrongComponent,
    #[error("tangent vectors are based at different points")]
    BaseMismatch,
    #[error("integration step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("geodesic integration drifted off the constraints (residual {0:e})")]
    IntegrationFailure(f64),
    #[error("operation requires the {expected} case")]
    WrongCase { expected: &'static str },
    #[error("frame is degenerate: {0}")]
    DegenerateFrame(String),
    #[error("curvature split needs dim M >= 4")]
    SplitUndefined,
    #[error("input connection has torsion (residual {0:e})")]
    Torsion(f64),
    #[error("subspace is not stable under A (residual {0:e})")]
    NotStable(f64),
    #[error("subspace is not symplectic")]
    NotSymplectic,
    #[error("group element violates its invariants (residual {0:e})")]
    NotInGroup(f64),
    #[error("illegal orbit invariants: {0}")]
    IllegalInvariants(String),
    #[error("integral over a noncompact submanifold needs compact support or a truncation radius")]
    Divergence,
    #[error("sampler error: {0}")]
    Sampler(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
