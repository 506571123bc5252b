use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar accepted by every sampler, calibration routine and diagnostic.
///
/// Implemented for `f32` and `f64`. Random variates are always drawn as `f64` and
/// converted, so a seeded run consumes the same stream regardless of precision.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("finite scalar")
    }

    fn neg_infinity() -> Self;

    fn infinity() -> Self;

    fn is_finite(self) -> bool;

    fn is_nan(self) -> bool;
}

impl Real for f64 {
    fn neg_infinity() -> Self {
        f64::NEG_INFINITY
    }
    fn infinity() -> Self {
        f64::INFINITY
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn is_nan(self) -> bool {
        f64::is_nan(self)
    }
}

impl Real for f32 {
    fn neg_infinity() -> Self {
        f32::NEG_INFINITY
    }
    fn infinity() -> Self {
        f32::INFINITY
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
    fn is_nan(self) -> bool {
        f32::is_nan(self)
    }
}

/// Numerically stable `log Σ exp(x_i)`. Returns `-∞` for an empty or all `-∞` input.
pub fn log_sum_exp<T: Real>(xs: impl IntoIterator<Item = T> + Clone) -> T {
    let max = xs
        .clone()
        .into_iter()
        .fold(T::neg_infinity(), |m, x| if x > m { x } else { m });
    if !Real::is_finite(max) {
        return max;
    }
    let sum = xs.into_iter().fold(T::zero(), |acc, x| acc + (x - max).exp());
    max + sum.ln()
}
