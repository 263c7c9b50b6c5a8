//! Floating-point scalar abstraction shared by the calibration core, the
//! metrics ledger and the forecasters.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used for every statistic: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Target for the stationary-distribution residual ‖w − wQ‖₁.
    fn fixed_point_tolerance() -> Self;

    /// Converts an `f64` literal. Panics only for values the type cannot
    /// represent at all, which never happens for the finite constants used here.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_count(k: u64) -> Self {
        Self::from_u64(k).expect("count fits in scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn fixed_point_tolerance() -> Self {
        1e-10
    }
}

impl Scalar for f32 {
    // f32 cannot resolve 1e-10; a few ulps of a unit-mass vector is the floor.
    fn fixed_point_tolerance() -> Self {
        1e-5
    }
}
