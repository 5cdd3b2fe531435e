use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::tape::{sigmoid, Var};
use super::AdError;

/// Scalar arithmetic shared by plain `f64` evaluation and taped [`Var`]s.
///
/// Numeric code is written once against this trait and runs either fast
/// (f64) or recorded (Var).
pub trait Real:
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
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn tanh(self) -> Self;
    fn sigmoid(self) -> Self;
    fn relu(self) -> Self;
    fn abs(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn min(self, other: Self) -> Self;
    fn max(self, other: Self) -> Self;

    fn checked_sqrt(self) -> Result<Self, AdError>;
    fn checked_ln(self) -> Result<Self, AdError>;
    fn checked_div(self, other: Self) -> Result<Self, AdError>;
    /// `sqrt(max(x, 0))`, derivative 0 at and below zero.
    fn sqrt_clamped(self) -> Self;

    fn dot(a: &[Self], b: &[Self]) -> Self;
    fn dot_const(a: &[Self], c: &[f64]) -> Self;

    fn max_c(self, c: f64) -> Self {
        self.max(Self::cst(c))
    }

    fn square(self) -> Self {
        self * self
    }

    fn sum(xs: &[Self]) -> Self {
        let ones = vec![1.0; xs.len()];
        Self::dot_const(xs, &ones)
    }

    fn is_finite(self) -> bool {
        self.value().is_finite()
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn sigmoid(self) -> Self {
        sigmoid(self)
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
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    #[inline]
    fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }
    #[inline]
    fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
    fn checked_sqrt(self) -> Result<Self, AdError> {
        if self >= 0.0 {
            Ok(self.sqrt())
        } else {
            Err(AdError::Domain {
                prim: super::Prim::Sqrt,
                value: self,
            })
        }
    }
    fn checked_ln(self) -> Result<Self, AdError> {
        if self > 0.0 {
            Ok(self.ln())
        } else {
            Err(AdError::Domain {
                prim: super::Prim::Ln,
                value: self,
            })
        }
    }
    fn checked_div(self, other: Self) -> Result<Self, AdError> {
        if other == 0.0 {
            Err(AdError::Domain {
                prim: super::Prim::Div,
                value: other,
            })
        } else {
            Ok(self / other)
        }
    }
    #[inline]
    fn sqrt_clamped(self) -> Self {
        if self > 0.0 {
            self.sqrt()
        } else {
            0.0
        }
    }
    #[inline]
    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
    #[inline]
    fn dot_const(a: &[Self], c: &[f64]) -> Self {
        Self::dot(a, c)
    }
}

impl<'t> Real for Var<'t> {
    #[inline]
    fn cst(v: f64) -> Self {
        Var::constant(v)
    }
    #[inline]
    fn value(self) -> f64 {
        Var::value(self)
    }
    fn sin(self) -> Self {
        Var::sin(self)
    }
    fn cos(self) -> Self {
        Var::cos(self)
    }
    fn exp(self) -> Self {
        Var::exp(self)
    }
    fn tanh(self) -> Self {
        Var::tanh(self)
    }
    fn sigmoid(self) -> Self {
        Var::sigmoid(self)
    }
    fn relu(self) -> Self {
        Var::relu(self)
    }
    fn abs(self) -> Self {
        Var::abs(self)
    }
    fn powf(self, p: f64) -> Self {
        Var::powf(self, p)
    }
    fn min(self, other: Self) -> Self {
        Var::min(self, other)
    }
    fn max(self, other: Self) -> Self {
        Var::max(self, other)
    }
    fn checked_sqrt(self) -> Result<Self, AdError> {
        Var::checked_sqrt(self)
    }
    fn checked_ln(self) -> Result<Self, AdError> {
        Var::checked_ln(self)
    }
    fn checked_div(self, other: Self) -> Result<Self, AdError> {
        Var::checked_div(self, other)
    }
    fn sqrt_clamped(self) -> Self {
        Var::sqrt_clamped(self)
    }
    fn dot(a: &[Self], b: &[Self]) -> Self {
        Var::dot(a, b)
    }
    fn dot_const(a: &[Self], c: &[f64]) -> Self {
        Var::dot_const(a, c)
    }
}
