//! Scalar abstraction over the floating-point element type.
//!
//! Everything numeric in this crate (images, graph features, Laplacians,
//! network parameters) is generic over [`Scalar`], which is implemented for
//! `f32` and `f64`. The pipeline defaults to `f64`; see the type aliases at
//! the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::distributions::uniform::SampleUniform;

/// Floating-point element type for images, graphs and models.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + SampleUniform
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from `f64` for constants and byte data.
    fn from_f64_const(x: f64) -> Self {
        Self::from_f64(x).expect("finite constant")
    }

    /// Conversion to `f64` for reporting and statistics.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("finite value")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand used throughout the crate for `f64 -> S` constant conversion.
pub(crate) fn cast<S: Scalar>(x: f64) -> S {
    S::from_f64_const(x)
}
