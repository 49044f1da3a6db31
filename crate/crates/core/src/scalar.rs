use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumCast};

/// Floating-point scalar the numeric core is generic over.
///
/// `f64` is the lane used by the CLI and the acceptance suite; `f32` works
/// with loosened tolerances. Exact contraction (e.g. rational arithmetic)
/// goes through [`crate::linalg::Mat`] directly, which only needs a ring.
pub trait Scalar: Float + NumCast + Sum + Debug + Display + Send + Sync + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Cast an `f64` constant into the scalar type, panicking on failure
/// (cannot fail for the provided impls).
#[inline]
pub fn cast<T: Scalar>(x: f64) -> T {
    T::from(x).expect("f64 constant representable in scalar type")
}
