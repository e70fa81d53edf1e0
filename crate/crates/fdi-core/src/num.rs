//! Scalar abstraction over the weight/score type.
//!
//! All model math is generic over [`Real`], implemented for `f32` and `f64`.
//! Concrete aliases live at the crate root.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used for feature weights, distances, similarities
/// and thresholds.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lift an `f64` constant into this type.
    ///
    /// Panics if the value is not representable, which cannot happen for the
    /// finite literals this crate uses.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }

    /// Lift a count into this type, saturating through `f64`.
    fn of_usize(x: usize) -> Self {
        Self::of(x as f64)
    }

    /// Lossy view as `f64`, for reporting and RNG parameterisation.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}
