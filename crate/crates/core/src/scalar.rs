//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Real floating-point scalar (`f32` or `f64`).
///
/// Everything in the crate is written against this trait. Tolerances quoted in
/// the documentation assume `f64`; `f32` works for exploratory use only.
pub trait Real: RealField + Copy + ToPrimitive + Default {
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Lossy conversion back to `f64`, for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Converts a count into the scalar type.
    #[inline]
    fn count(n: usize) -> Self {
        Self::lit(n as f64)
    }

    /// Smallest positive normal value.
    fn tiny() -> Self;
}

impl Real for f32 {
    fn tiny() -> Self {
        f32::MIN_POSITIVE
    }
}

impl Real for f64 {
    fn tiny() -> Self {
        f64::MIN_POSITIVE
    }
}

/// Library-wide default tolerance for algebraic identities on exact-input matrices.
pub const DEFAULT_TOL: f64 = 1e-9;
