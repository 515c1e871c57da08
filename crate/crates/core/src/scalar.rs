//! Floating-point abstraction shared by the analytical modules.
//!
//! Geometry, link budget, detection probabilities and the Markov chain are
//! written once against [`Scalar`] and instantiated for `f32` and `f64`.
//! Special functions that `num-traits` does not provide (`erfc`, `ln_gamma`)
//! are forwarded to `libm`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used by the analytical model.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal or configuration value.
    fn of(x: f64) -> Self;

    /// Converts a count.
    fn of_usize(n: usize) -> Self {
        Self::of(n as f64)
    }

    /// Lossy conversion back to `f64` for reporting.
    fn as_f64(self) -> f64;

    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Natural log of the gamma function.
    fn ln_gamma(self) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    fn erfc(self) -> Self {
        libm::erfc(self)
    }

    fn ln_gamma(self) -> Self {
        libm::lgamma(self)
    }
}

impl Scalar for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        f64::from(self)
    }

    fn erfc(self) -> Self {
        libm::erfcf(self)
    }

    fn ln_gamma(self) -> Self {
        libm::lgammaf(self)
    }
}

/// Floor of a non-negative real as a count; negative or NaN input maps to 0.
pub(crate) fn floor_count<S: Scalar>(x: S) -> usize {
    x.floor().to_usize().unwrap_or(0)
}
