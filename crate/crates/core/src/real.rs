//! Scalar abstraction so the numeric core runs on either `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the library is generic over.
///
/// Implemented for `f32` and `f64`. Algorithms that need literal constants
/// go through [`real`], and anything reported to the user (Monte-Carlo
/// summaries, CSV rows) is widened to `f64` via `ToPrimitive`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into the working scalar type.
///
/// For `f32` this rounds to the nearest representable value, which is the
/// behaviour we want for tolerances and literal coefficients.
#[inline]
pub fn real<T: Real>(value: f64) -> T {
    T::from_f64(value).expect("f64 converts to every Real scalar")
}

/// Widens any `Real` scalar to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(value: T) -> f64 {
    value.to_f64().expect("every Real scalar widens to f64")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_round_trips_f64_constants() {
        let x: f64 = real(0.37);
        assert_eq!(x, 0.37);
        assert_eq!(to_f64(x), 0.37);
    }

    #[test]
    fn real_rounds_into_f32() {
        let x: f32 = real(0.1);
        assert_eq!(x, 0.1f32);
    }
}
