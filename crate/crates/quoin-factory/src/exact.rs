//! Exact probability arithmetic for test oracles.
//!
//! Closed-form protocol algebra (the m/s/t chains) stays in rationals; the
//! quoin measurement probabilities need square roots, which are computed to a
//! fixed decimal precision well below any statistical tolerance in the suite.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use thiserror::Error;

/// Decimal digits carried by [`ExactProb::sqrt`]. Oracle error is then below
/// 1e-60, ten orders under the tightest equality tolerance used in tests.
pub const SQRT_DIGITS: u32 = 60;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExactError {
    #[error("value {0} is outside [0, 1]")]
    OutOfRange(String),
}

/// An exact probability: a big rational confined to `[0, 1]`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExactProb(BigRational);

impl ExactProb {
    pub fn new(value: BigRational) -> Result<Self, ExactError> {
        if value < BigRational::zero() || value > BigRational::one() {
            return Err(ExactError::OutOfRange(value.to_string()));
        }
        Ok(Self(value))
    }

    pub fn zero() -> Self {
        Self(BigRational::zero())
    }

    pub fn one() -> Self {
        Self(BigRational::one())
    }

    /// Exact ratio `num/den`.
    pub fn ratio(num: i64, den: i64) -> Self {
        Self::new(BigRational::new(BigInt::from(num), BigInt::from(den)))
            .expect("ratio outside [0,1]")
    }

    /// Treats the `f64` as the exact rational it is (every finite `f64` is one).
    pub fn from_f64(value: f64) -> Result<Self, ExactError> {
        let r = BigRational::from_float(value)
            .ok_or_else(|| ExactError::OutOfRange(value.to_string()))?;
        Self::new(r)
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().expect("probability fits in f64")
    }

    pub fn complement(&self) -> Self {
        Self(BigRational::one() - &self.0)
    }

    /// Floor square root with error in `[0, 10^-SQRT_DIGITS)`.
    pub fn sqrt(&self) -> Self {
        Self(sqrt_rational(&self.0, SQRT_DIGITS))
    }

    /// Absolute difference, handy for oracle-vs-oracle comparisons.
    pub fn abs_diff(&self, other: &Self) -> BigRational {
        (&self.0 - &other.0).abs()
    }
}

impl fmt::Debug for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExactProb({} ~ {})", self.0, self.to_f64())
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

macro_rules! forward_rational_op {
    ($trait:ident, $method:ident) => {
        impl $trait for &ExactProb {
            type Output = BigRational;
            fn $method(self, rhs: Self) -> BigRational {
                (&self.0).$method(&rhs.0)
            }
        }
    };
}

forward_rational_op!(Add, add);
forward_rational_op!(Sub, sub);
forward_rational_op!(Mul, mul);
forward_rational_op!(Div, div);

/// Floor square root of a nonnegative rational to `digits` decimal places.
pub fn sqrt_rational(x: &BigRational, digits: u32) -> BigRational {
    assert!(!x.is_negative(), "sqrt of negative rational");
    if x.is_zero() {
        return BigRational::zero();
    }
    let scale = BigInt::from(10u32).pow(digits);
    // floor(sqrt(n/d * scale^2)) = floor(sqrt(n * d * scale^2) / d)
    let n = x.numer() * &scale * &scale * x.denom();
    let root = n.sqrt();
    BigRational::new(root, x.denom() * scale)
}
