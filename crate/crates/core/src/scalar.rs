use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating scalar the solvers are generic over.
///
/// Constants are written as `f64` literals and converted through [`Scalar::of`],
/// so an `f32` instantiation rounds the same reference values rather than
/// recomputing them. `lossy_f64` is the reverse door for error reporting and
/// output formatting, where widening is harmless.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self;
    fn lossy_f64(self) -> f64;

    fn of_usize(v: usize) -> Self {
        Self::of(v as f64)
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }

    #[inline]
    fn lossy_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn lossy_f64(self) -> f64 {
        self as f64
    }
}
