//! Scalar abstraction shared by every numerical kernel in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point type the dynamics, physical models and networks are generic over.
///
/// Implemented for `f32`, `f64` and the forward-mode [`Dual`](crate::dual::Dual)
/// number used to differentiate physical-model steps.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into this type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Primal value as `f64` (drops any derivative part).
    fn value_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn value_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn value_f64(self) -> f64 {
        self
    }
}

/// Lossless-as-possible conversion between scalar types (e.g. `f64` parameters into `Dual<f64>`).
pub trait Lift<S> {
    fn lift(self) -> S;
}

impl<T: Scalar, S: Scalar> Lift<S> for T {
    #[inline]
    fn lift(self) -> S {
        S::of(self.value_f64())
    }
}
