//! Scalar abstraction over exact rationals and `f64`.

use std::fmt::Debug;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Arbitrary-precision rational number used by the exact mode.
pub type Rational = BigRational;

/// Largest exponent magnitude accepted by exact powers.
const MAX_EXACT_EXPONENT: i64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Float,
    Rational,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Float => f.write_str("float"),
            Mode::Rational => f.write_str("rational"),
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "float" => Ok(Mode::Float),
            "rational" => Ok(Mode::Rational),
            other => Err(format!("unknown mode `{other}` (expected float or rational)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-integer exponent {0} has no exact rational value")]
    IrrationalPower(String),
    #[error("exponent {0} is out of range")]
    ExponentRange(String),
    #[error("value is not finite")]
    NonFinite,
}

/// Field operations plus the conversions the crate needs.
///
/// Implemented for `f64` and [`Rational`].
pub trait Scalar:
    Clone + Debug + PartialEq + PartialOrd + Num + Signed + Send + Sync + 'static
{
    const MODE: Mode;

    fn from_rational(r: &Rational) -> Self;

    fn from_int(v: i64) -> Self;

    fn to_f64(&self) -> f64;

    /// Exact rational value. Fails only for non-finite floats.
    fn to_exact(&self) -> Result<Rational, ScalarError>;

    /// `self ^ exp`. Exact mode requires an integral exponent.
    fn checked_pow(&self, exp: &Self) -> Result<Self, ScalarError>;

    fn is_finite(&self) -> bool;

    /// `p/q` in exact mode, shortest round-trip decimal in float mode.
    fn format(&self) -> String;

    fn parse_scalar(text: &str) -> Option<Self>;

    fn checked_div(&self, rhs: &Self) -> Result<Self, ScalarError> {
        if rhs.is_zero() {
            Err(ScalarError::DivisionByZero)
        } else {
            Ok(self.clone() / rhs.clone())
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

impl Scalar for f64 {
    const MODE: Mode = Mode::Float;

    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }

    fn from_int(v: i64) -> Self {
        v as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_exact(&self) -> Result<Rational, ScalarError> {
        Rational::from_float(*self).ok_or(ScalarError::NonFinite)
    }

    fn checked_pow(&self, exp: &Self) -> Result<Self, ScalarError> {
        if !exp.is_finite() {
            return Err(ScalarError::NonFinite);
        }
        if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
            if *self == 0.0 && *exp < 0.0 {
                return Err(ScalarError::DivisionByZero);
            }
            Ok(self.powi(*exp as i32))
        } else {
            if *self == 0.0 && *exp < 0.0 {
                return Err(ScalarError::DivisionByZero);
            }
            let value = self.powf(*exp);
            if value.is_nan() {
                Err(ScalarError::NonFinite)
            } else {
                Ok(value)
            }
        }
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }

    fn format(&self) -> String {
        format!("{self:?}")
    }

    fn parse_scalar(text: &str) -> Option<Self> {
        if let Ok(v) = text.parse::<f64>() {
            return Some(v);
        }
        Rational::from_str(text).ok().map(|r| rational_to_f64(&r))
    }
}

impl Scalar for Rational {
    const MODE: Mode = Mode::Rational;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn from_int(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn to_exact(&self) -> Result<Rational, ScalarError> {
        Ok(self.clone())
    }

    fn checked_pow(&self, exp: &Self) -> Result<Self, ScalarError> {
        if !exp.is_integer() {
            return Err(ScalarError::IrrationalPower(exp.to_string()));
        }
        let e = exp
            .to_integer()
            .to_i64()
            .filter(|e| e.abs() <= MAX_EXACT_EXPONENT)
            .ok_or_else(|| ScalarError::ExponentRange(exp.to_string()))?;
        if self.is_zero() {
            return match e.signum() {
                -1 => Err(ScalarError::DivisionByZero),
                0 => Ok(Rational::one()),
                _ => Ok(Rational::zero()),
            };
        }
        Ok(self.pow(e as i32))
    }

    fn is_finite(&self) -> bool {
        true
    }

    fn format(&self) -> String {
        self.to_string()
    }

    fn parse_scalar(text: &str) -> Option<Self> {
        if let Ok(r) = Rational::from_str(text.trim()) {
            return Some(r);
        }
        // Decimal notation written by float-mode runs.
        let v: f64 = text.trim().parse().ok()?;
        Rational::from_float(v)
    }
}

/// Correctly rounded conversion that survives huge numerators and denominators.
pub fn rational_to_f64(r: &Rational) -> f64 {
    if let Some(v) = ToPrimitive::to_f64(r) {
        if v.is_finite() {
            return v;
        }
    }
    // Fall back to bit-length scaling for values outside the direct range.
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    let num = r.numer().abs();
    let den = r.denom().clone();
    let shift = num.bits() as i64 - den.bits() as i64;
    if shift > 1100 {
        return sign * f64::INFINITY;
    }
    if shift < -1100 {
        return sign * 0.0;
    }
    let scaled = if shift >= 0 {
        Rational::new(num, den << (shift as usize))
    } else {
        Rational::new(num << ((-shift) as usize), den)
    };
    let half = (shift / 2) as i32;
    let rest = (shift - shift / 2) as i32;
    sign * ToPrimitive::to_f64(&scaled).unwrap_or(0.0) * 2f64.powi(half) * 2f64.powi(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_requires_integer_exponent() {
        let two = Rational::from_int(2);
        let half = Rational::new(BigInt::from(1), BigInt::from(2));
        assert_eq!(two.checked_pow(&Rational::from_int(10)).unwrap(), Rational::from_int(1024));
        assert!(matches!(two.checked_pow(&half), Err(ScalarError::IrrationalPower(_))));
        assert_eq!(
            Rational::zero().checked_pow(&Rational::from_int(-1)),
            Err(ScalarError::DivisionByZero)
        );
    }

    #[test]
    fn float_power_accepts_fractional_exponent() {
        assert_eq!(4.0f64.checked_pow(&0.5).unwrap(), 2.0);
        assert_eq!(2.0f64.checked_pow(&-2.0).unwrap(), 0.25);
    }

    #[test]
    fn formatting_round_trips() {
        let r = Rational::new(BigInt::from(-3), BigInt::from(4));
        assert_eq!(r.format(), "-3/4");
        assert_eq!(Rational::parse_scalar("-3/4").unwrap(), r);
        let x = 0.1f64 + 0.2;
        assert_eq!(f64::parse_scalar(&x.format()).unwrap(), x);
        assert_eq!(1e-300f64.format(), "1e-300");
    }

    #[test]
    fn huge_rationals_convert() {
        let big = Rational::from_int(2).checked_pow(&Rational::from_int(1500)).unwrap();
        assert_eq!(rational_to_f64(&big), f64::INFINITY);
        let tiny = big.recip();
        assert_eq!(rational_to_f64(&tiny), 0.0);
        let p = Rational::from_int(2).checked_pow(&Rational::from_int(1000)).unwrap();
        assert_eq!(rational_to_f64(&p), 2f64.powi(1000));
    }
}
