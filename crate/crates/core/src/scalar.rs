//! Scalar abstraction shared by every numerical kernel.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use nalgebra::{ComplexField, RealField};
use num_traits::{FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real scalar usable by the spectral, dense linear-algebra and time-stepping code.
///
/// Implemented for `f32` and `f64`. Tolerances throughout the crate are tuned for `f64`.
pub trait Real:
    RealField + FftNum + FromPrimitive + ToPrimitive + Copy + Sum + Debug + Display + LowerExp
{
}

impl<T> Real for T where
    T: RealField + FftNum + FromPrimitive + ToPrimitive + Copy + Sum + Debug + Display + LowerExp
{
}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<S: Real>(x: f64) -> S {
    S::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Widens a scalar to `f64` for reporting.
#[inline]
pub fn to_f64<S: Real>(x: S) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Absolute value without the `Signed`/`ComplexField` ambiguity.
#[inline]
pub fn abs<S: Real>(x: S) -> S {
    <S as ComplexField>::abs(x)
}

/// Sign of `x` (`±1`, zero maps to `+1`).
#[inline]
pub fn sign<S: Real>(x: S) -> S {
    if x < S::zero() {
        -S::one()
    } else {
        S::one()
    }
}

/// Largest absolute entry of a slice.
pub fn max_abs<S: Real>(v: &[S]) -> S {
    v.iter().fold(S::zero(), |m, &x| m.max(abs(x)))
}
