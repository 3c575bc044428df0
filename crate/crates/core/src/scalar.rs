//! Scalar abstraction shared by every numerical module.

use std::fmt::{Display, LowerExp};

use num_traits::{Float, FloatConst, NumAssign};
use rustfft::FftNum;

/// Floating-point type the solver can run on.
///
/// Implemented for `f32` and `f64`. All tolerances quoted in the tests assume
/// `f64`; `f32` runs are useful for quick exploratory sweeps only.
pub trait Real:
    Float + FloatConst + FftNum + NumAssign + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn count(n: usize) -> Self {
        <Self as num_traits::NumCast>::from(n).expect("count representable")
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FftNum + NumAssign + Display + LowerExp + Default + Send + Sync + 'static
{
}
