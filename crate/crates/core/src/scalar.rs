use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Real floating-point type the imaging operators are generic over.
///
/// Implemented for `f32` and `f64`. Everything in memory defaults to `f64`;
/// `f32` is the on-disk precision and is also usable for whole pipelines.
pub trait Scalar:
    FftNum + Float + FloatConst + NumAssign + FromPrimitive + ToPrimitive + Default + Display + LowerExp + Debug
{
    /// Lossy conversion from an `f64` constant.
    fn of(v: f64) -> Self;
    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}
