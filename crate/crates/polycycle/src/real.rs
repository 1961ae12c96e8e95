//! Scalar abstraction so field evaluation and integration can run in either
//! binary64 or double-double arithmetic.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
pub use twofloat::TwoFloat;

pub trait Real:
    Copy
    + Send
    + Sync
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn abs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
    fn max(self, other: Self) -> Self {
        if self > other {
            self
        } else {
            other
        }
    }
    fn min(self, other: Self) -> Self {
        if self < other {
            self
        } else {
            other
        }
    }
    fn ipow(self, k: u32) -> Self {
        let mut acc = Self::one();
        let mut base = self;
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
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
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

impl Real for TwoFloat {
    #[inline]
    fn from_f64(v: f64) -> Self {
        TwoFloat::from(v)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self.hi() + self.lo()
    }
    #[inline]
    fn sqrt(self) -> Self {
        TwoFloat::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        TwoFloat::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        TwoFloat::ln(self)
    }
}

/// Working precision of an integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    Double,
    DoubleDouble,
}

#[inline]
pub fn lift<T: Real>(x: [f64; 2]) -> [T; 2] {
    [T::from_f64(x[0]), T::from_f64(x[1])]
}

#[inline]
pub fn lower<T: Real>(x: [T; 2]) -> [f64; 2] {
    [x[0].to_f64(), x[1].to_f64()]
}
