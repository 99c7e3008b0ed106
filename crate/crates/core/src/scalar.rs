//! The numeric abstraction shared by every signal, distance, and rate.
//!
//! Sensor values, DTW costs, and thresholds are all written against
//! [`Scalar`], so the same code runs over `f32`, `f64`, or exact rationals
//! (`Ratio<i64>`). The rational instance is what the oracle tests use to
//! compare the dynamic program with brute-force enumeration without any
//! rounding slack.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// A real-valued scalar usable for signals and distances.
pub trait Scalar:
    Copy + Num + Signed + PartialOrd + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts from `f64`; `None` when the value has no representation.
    fn from_f64(value: f64) -> Option<Self>;

    fn to_f64(self) -> f64;

    fn from_usize(n: usize) -> Self;

    /// Rejects NaN and infinities. Exact types are always finite.
    fn is_finite_value(self) -> bool;

    /// Lossy convenience for constants known to be representable.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal not representable in scalar type")
    }

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

macro_rules! impl_float_scalar {
    ($($ty:ty),*) => {
        $(
            impl Scalar for $ty {
                #[inline]
                fn from_f64(value: f64) -> Option<Self> {
                    <$ty as FromPrimitive>::from_f64(value)
                }

                #[inline]
                fn to_f64(self) -> f64 {
                    self as f64
                }

                #[inline]
                fn from_usize(n: usize) -> Self {
                    n as $ty
                }

                #[inline]
                fn is_finite_value(self) -> bool {
                    self.is_finite()
                }
            }
        )*
    };
}

impl_float_scalar!(f32, f64);

impl Scalar for Ratio<i64> {
    fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        Ratio::<i64>::approximate_float(value)
    }

    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn from_usize(n: usize) -> Self {
        Ratio::from_integer(n as i64)
    }

    fn is_finite_value(self) -> bool {
        true
    }
}
