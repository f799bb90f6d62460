//! Floating-point scalar abstraction: every numeric module is generic over
//! [`Scalar`] so the same code runs in `f64` (default) or `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;

/// Element type of tensors and geometry: `f32` or `f64`.
pub trait Scalar:
    Float + num_traits::NumAssignOps + Debug + Display + Sum + Send + Sync + 'static
{
    /// Name recorded in checkpoint manifests.
    const DTYPE: &'static str;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";
}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub fn s<S: Scalar>(x: f64) -> S {
    S::from(x).expect("f64 constant representable in scalar type")
}
