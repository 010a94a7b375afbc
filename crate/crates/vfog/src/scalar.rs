use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar the network stack is generic over.
///
/// `f32` and `f64` both satisfy it. The shipped pipeline instantiates
/// everything at [`crate::Real`] (`f64`); `f32` stays available for
/// callers that want the smaller footprint.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossless enough for every constant we feed in (learning rates,
    /// activations of literals); `f64 -> f32` rounds, which is the
    /// expected cost of choosing `f32`.
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }

    fn to_f64_c(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// sigmoid(x) = 1 / (1 + e^-x)
pub fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint_and_symmetry() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        let x = 1.7f64;
        assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        let y = sigmoid(0.3f32);
        assert!((y - 0.574442516).abs() < 1e-6);
    }
}
