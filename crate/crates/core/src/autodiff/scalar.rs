use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Numeric type the network and loss code is generic over.
///
/// Implemented by `f64` (plain evaluation) and by tape [`Var`](super::Var)
/// (reverse-mode gradients). Constants are lifted relative to an existing
/// value so that tape-backed scalars stay on their tape.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn value(&self) -> f64;
    /// A constant living in the same context as `self`.
    fn constant_like(&self, c: f64) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    /// `max(x, 0)`; derivative at exactly 0 is 0.
    fn relu(self) -> Self;
    fn sigmoid(self) -> Self;
    /// `|x|`; derivative at exactly 0 is 0.
    fn abs(self) -> Self;
    fn square(self) -> Self {
        self * self
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Scalar for f64 {
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
    #[inline]
    fn sigmoid(self) -> Self {
        sigmoid(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
}
