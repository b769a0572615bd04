//! Floating-point abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar type the library is generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, rounding to nearest for narrower types.
    fn lit(x: f64) -> Self;

    /// Widens to `f64` (exact for both supported types).
    fn into_f64(self) -> f64;

    /// Short tag written into checkpoints.
    const NAME: &'static str;
}

impl Scalar for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn into_f64(self) -> f64 {
        self
    }
    const NAME: &'static str = "f64";
}

impl Scalar for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn into_f64(self) -> f64 {
        self as f64
    }
    const NAME: &'static str = "f32";
}

/// `n` as a scalar.
#[inline]
pub(crate) fn from_usize<S: Scalar>(n: usize) -> S {
    S::lit(n as f64)
}
