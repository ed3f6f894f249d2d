//! Scalar abstraction for the numeric kernels.

use num_traits::{Float, FromPrimitive};
use rustfft::FftNum;

/// Floating-point scalar usable for samples and numeric kernels:
/// `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + FftNum + Default {
    /// Lossless-enough conversion from `f64` for constants.
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to scalar")
    }
    /// Widening conversion to `f64` for accumulation and reporting.
    fn to_f64_c(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
