//! Floating-point abstraction shared by every numeric container in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Scalar type the fields, kernels, mixture models and solver are generic over.
///
/// Implemented for `f32` and `f64`. The trait also pulls in [`FftNum`] so the
/// transform-based convolution can run in the same precision as the data.
pub trait Real:
    'static
    + Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + FftNum
    + Default
    + Sum
    + Debug
    + Display
    + Send
    + Sync
{
    /// Converts an `f64` literal or parameter.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Real")
    }

    /// Converts a count.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
