//! Numeric modes.
//!
//! Every algorithm in the crate is generic over [`Scalar`], which is
//! implemented for `f64` (fast, tolerance-based) and [`Rational`] (exact,
//! arbitrary precision). A computation is monomorphised for one mode, so two
//! modes can never be mixed within a call.

use std::fmt;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::Value;

use crate::amplitude::AmplitudeTerm;
use crate::error::{Error, Result};

/// Exact rational number used in exact mode.
pub type Rational = BigRational;

/// Relative cancellation threshold for summed amplitudes in float mode.
const FLOAT_CANCEL_REL: f64 = 1e-12;
/// Default float time tolerance, relative to the largest time in play.
const FLOAT_TIME_TOL_REL: f64 = 1e-9;

pub trait Scalar:
    Clone + fmt::Debug + fmt::Display + PartialEq + PartialOrd + Send + Sync + Signed + 'static
{
    /// `true` when every operation is exact.
    const EXACT: bool;

    fn mode_name() -> &'static str;

    fn from_int(v: i64) -> Self;

    /// Converts a double. Exact in rational mode; `None` for non-finite input.
    fn from_f64(v: f64) -> Option<Self>;

    fn to_f64(&self) -> f64;

    fn from_rational(v: &Rational) -> Self;

    /// Exact rational value of `self` (finite values only).
    fn to_rational(&self) -> Rational;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }

    /// Parses `"p/q"`, an integer, or a decimal literal such as `"-1.25e-3"`.
    fn parse_str(s: &str) -> Result<Self>;

    fn to_json(&self) -> Value;

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::Number(n) => Self::parse_str(&n.to_string()),
            Value::String(s) => Self::parse_str(s),
            other => Err(Error::Parse(format!(
                "expected a number or \"p/q\" string, got {other}"
            ))),
        }
    }

    /// Default tolerance for comparing times of magnitude `scale`.
    fn default_time_tol(scale: &Self) -> Self;

    /// Whether `sum`, obtained by adding terms whose absolute values sum to
    /// `magnitude`, should be treated as an exact zero.
    fn cancels(sum: &Self, magnitude: &Self) -> bool;

    fn powu(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    /// Evaluates `sum coeff * x^x_exp * (1 - x^2)^q_exp` over `terms`.
    fn eval_terms(x: &[Self], terms: &[AmplitudeTerm]) -> Self {
        let m = x.len();
        let mut max_x = vec![0u32; m];
        let mut max_q = vec![0u32; m];
        for t in terms {
            for n in 0..m {
                max_x[n] = max_x[n].max(t.x_exponents[n]);
                max_q[n] = max_q[n].max(t.q_exponents[n]);
            }
        }
        let xpow = power_tables(x, &max_x);
        let q: Vec<Self> = x
            .iter()
            .map(|v| Self::one() - v.clone() * v.clone())
            .collect();
        let qpow = power_tables(&q, &max_q);
        let mut sum = Self::zero();
        for t in terms {
            let mut prod = Self::from_int(t.coeff);
            for n in 0..m {
                let (ex, eq) = (t.x_exponents[n] as usize, t.q_exponents[n] as usize);
                if ex > 0 {
                    prod = prod * xpow[n][ex].clone();
                }
                if eq > 0 {
                    prod = prod * qpow[n][eq].clone();
                }
            }
            sum = sum + prod;
        }
        sum
    }
}

fn power_tables<S: Clone + One + std::ops::Mul<Output = S>>(
    base: &[S],
    max: &[u32],
) -> Vec<Vec<S>> {
    base.iter()
        .zip(max)
        .map(|(b, &e)| {
            let mut row = Vec::with_capacity(e as usize + 1);
            row.push(S::one());
            for j in 1..=e as usize {
                let next = row[j - 1].clone() * b.clone();
                row.push(next);
            }
            row
        })
        .collect()
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn mode_name() -> &'static str {
        "float"
    }

    fn from_int(v: i64) -> Self {
        v as f64
    }

    fn from_f64(v: f64) -> Option<Self> {
        v.is_finite().then_some(v)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_rational(v: &Rational) -> Self {
        Scalar::to_f64(v)
    }

    fn to_rational(&self) -> Rational {
        Rational::from_float(*self).unwrap_or_else(Rational::zero)
    }

    fn parse_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let v = if s.contains('/') {
            Scalar::to_f64(&Rational::parse_str(s)?)
        } else {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("{s:?}: {e}")))?
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Parse(format!("{s:?} is not a finite number")))
        }
    }

    fn to_json(&self) -> Value {
        serde_json::Number::from_f64(*self).map_or(Value::Null, Value::Number)
    }

    fn default_time_tol(scale: &Self) -> Self {
        FLOAT_TIME_TOL_REL * scale.abs()
    }

    fn cancels(sum: &Self, magnitude: &Self) -> bool {
        sum.abs() <= FLOAT_CANCEL_REL * magnitude
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn mode_name() -> &'static str {
        "rational"
    }

    fn from_int(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn from_f64(v: f64) -> Option<Self> {
        Rational::from_float(v)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_rational(v: &Rational) -> Self {
        v.clone()
    }

    fn to_rational(&self) -> Rational {
        self.clone()
    }

    fn parse_str(s: &str) -> Result<Self> {
        parse_exact(s.trim())
    }

    fn to_json(&self) -> Value {
        Value::String(self.to_string())
    }

    fn default_time_tol(_scale: &Self) -> Self {
        Rational::zero()
    }

    fn cancels(sum: &Self, _magnitude: &Self) -> bool {
        sum.is_zero()
    }

    fn eval_terms(x: &[Self], terms: &[AmplitudeTerm]) -> Self {
        // Integer evaluation over a common denominator: with x_n = p_n / d_n,
        // x_n^a (1 - x_n^2)^b = p_n^a (d_n^2 - p_n^2)^b / d_n^(a + 2b).
        let m = x.len();
        let mut max_x = vec![0u32; m];
        let mut max_q = vec![0u32; m];
        let mut max_den = vec![0u32; m];
        for t in terms {
            for n in 0..m {
                max_x[n] = max_x[n].max(t.x_exponents[n]);
                max_q[n] = max_q[n].max(t.q_exponents[n]);
                max_den[n] = max_den[n].max(t.x_exponents[n] + 2 * t.q_exponents[n]);
            }
        }
        let nums: Vec<BigInt> = x.iter().map(|v| v.numer().clone()).collect();
        let dens: Vec<BigInt> = x.iter().map(|v| v.denom().clone()).collect();
        let qs: Vec<BigInt> = nums.iter().zip(&dens).map(|(p, d)| d * d - p * p).collect();
        let npow = power_tables(&nums, &max_x);
        let qpow = power_tables(&qs, &max_q);
        let dpow = power_tables(&dens, &max_den);
        let mut sum = BigInt::zero();
        for t in terms {
            let mut prod = BigInt::from(t.coeff);
            for n in 0..m {
                let (ex, eq) = (t.x_exponents[n], t.q_exponents[n]);
                if ex > 0 {
                    prod *= &npow[n][ex as usize];
                }
                if eq > 0 {
                    prod *= &qpow[n][eq as usize];
                }
                let pad = max_den[n] - ex - 2 * eq;
                if pad > 0 {
                    prod *= &dpow[n][pad as usize];
                }
            }
            sum += prod;
        }
        let mut den = BigInt::one();
        for n in 0..m {
            if max_den[n] > 0 {
                den *= &dpow[n][max_den[n] as usize];
            }
        }
        Rational::new(sum, den)
    }
}

/// Exact parse of `"p/q"`, integers, and decimal/scientific literals.
fn parse_exact(s: &str) -> Result<Rational> {
    let err = || Error::Parse(format!("cannot parse {s:?} as an exact rational"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| err())?;
        let q: BigInt = q.trim().parse().map_err(|_| err())?;
        if q.is_zero() {
            return Err(Error::Parse(format!("{s:?} has a zero denominator")));
        }
        return Ok(Rational::new(p, q));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| err())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(err());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut num = BigInt::parse_bytes(all_digits.as_bytes(), 10).ok_or_else(err)?;
    if negative {
        num = -num;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        Rational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Whether a rational is a non-negative integer power-of-two multiple; used by
/// fixtures that must be representable in both modes.
/// Display form for error messages: exact when short, otherwise a float
/// approximation.
pub(crate) fn short<S: Scalar>(v: &S) -> String {
    let s = v.to_string();
    if s.len() <= 48 {
        s
    } else {
        format!("~{:.12e}", v.to_f64())
    }
}

pub fn is_dyadic(v: &Rational) -> bool {
    let d = v.denom();
    d.sign() == Sign::Plus && (d & (d - BigInt::one())).is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(p: i64, d: i64) -> Rational {
        Rational::from_ratio(p, d)
    }

    #[test]
    fn exact_parse_forms() {
        assert_eq!(Rational::parse_str("3/4").unwrap(), q(3, 4));
        assert_eq!(Rational::parse_str("-6/8").unwrap(), q(-3, 4));
        assert_eq!(Rational::parse_str("0.7").unwrap(), q(7, 10));
        assert_eq!(Rational::parse_str("-1.25e-3").unwrap(), q(-1, 800));
        assert_eq!(Rational::parse_str("2E2").unwrap(), q(200, 1));
        assert_eq!(Rational::parse_str(".5").unwrap(), q(1, 2));
        assert!(Rational::parse_str("1/0").is_err());
        assert!(Rational::parse_str("abc").is_err());
        assert!(Rational::parse_str("").is_err());
    }

    #[test]
    fn float_parse_accepts_fractions() {
        assert_eq!(f64::parse_str("1/4").unwrap(), 0.25);
        assert_eq!(f64::parse_str("0.7").unwrap(), 0.7);
        assert!(f64::parse_str("inf").is_err());
    }

    #[test]
    fn json_round_trip() {
        let r = q(-7, 3);
        assert_eq!(Rational::from_json(&r.to_json()).unwrap(), r);
        let v = 0.1 + 0.2;
        assert_eq!(f64::from_json(&v.to_json()).unwrap(), v);
        // A JSON number in rational mode is read from its decimal literal.
        let n: Value = serde_json::from_str("0.7").unwrap();
        assert_eq!(Rational::from_json(&n).unwrap(), q(7, 10));
    }

    #[test]
    fn powu_matches_repeated_product() {
        let x = q(-2, 3);
        assert_eq!(x.powu(0), q(1, 1));
        assert_eq!(x.powu(5), q(-32, 243));
        assert_eq!(1.5f64.powu(3), 3.375);
    }

    #[test]
    fn cancellation_rules() {
        assert!(Rational::cancels(&q(0, 1), &q(1, 1)));
        assert!(!Rational::cancels(&q(1, 1_000_000_000), &q(1, 1)));
        assert!(f64::cancels(&1e-17, &0.5));
        assert!(!f64::cancels(&1e-5, &0.5));
        assert!(f64::cancels(&0.0, &0.0));
    }

    #[test]
    fn dyadic_detection() {
        assert!(is_dyadic(&q(3, 1024)));
        assert!(!is_dyadic(&q(1, 3)));
    }
}
