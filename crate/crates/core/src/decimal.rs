//! Fixed-point decimal with three fractional digits.
//!
//! All times, durations and numeric fluent values go through this type so that
//! plan validation compares exact integers instead of floats.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of thousandths in one unit.
const SCALE: i64 = 1000;

/// A decimal number stored as an integer count of thousandths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Decimal(i64);

/// Required separation between interfering events, one thousandth.
pub const EPSILON: Decimal = Decimal(1);

impl Decimal {
    pub const ZERO: Decimal = Decimal(0);

    pub const fn from_millis(millis: i64) -> Self {
        Decimal(millis)
    }

    pub const fn from_int(value: i64) -> Self {
        Decimal(value * SCALE)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    /// Rounds to the nearest thousandth, half away from zero.
    pub fn from_f64(value: f64) -> Self {
        Decimal((value * SCALE as f64).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn abs_diff(self, other: Decimal) -> Decimal {
        Decimal((self.0 - other.0).abs())
    }

    pub fn checked_mul(self, other: Decimal) -> Option<Decimal> {
        let wide = (self.0 as i128) * (other.0 as i128);
        i64::try_from(round_div(wide, SCALE as i128)).ok().map(Decimal)
    }

    pub fn checked_div(self, other: Decimal) -> Option<Decimal> {
        if other.0 == 0 {
            return None;
        }
        let wide = (self.0 as i128) * (SCALE as i128);
        i64::try_from(round_div(wide, other.0 as i128)).ok().map(Decimal)
    }
}

fn round_div(num: i128, den: i128) -> i128 {
    let q = num / den;
    let r = num % den;
    if 2 * r.abs() >= den.abs() {
        if (num < 0) ^ (den < 0) {
            q - 1
        } else {
            q + 1
        }
    } else {
        q
    }
}

impl Add for Decimal {
    type Output = Decimal;
    fn add(self, rhs: Decimal) -> Decimal {
        Decimal(self.0 + rhs.0)
    }
}

impl Sub for Decimal {
    type Output = Decimal;
    fn sub(self, rhs: Decimal) -> Decimal {
        Decimal(self.0 - rhs.0)
    }
}

impl Neg for Decimal {
    type Output = Decimal;
    fn neg(self) -> Decimal {
        Decimal(-self.0)
    }
}

/// Prints at least one fractional digit and at most three, trailing zeros trimmed:
/// `10.0`, `10.25`, `0.001`.
impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let int = abs / SCALE as u64;
        let frac = abs % SCALE as u64;
        let mut digits = format!("{frac:03}");
        while digits.len() > 1 && digits.ends_with('0') {
            digits.pop();
        }
        write!(f, "{sign}{int}.{digits}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid decimal literal `{0}`")]
pub struct DecimalParseError(pub String);

/// Accepts `10`, `10.5`, `-3.125`, `.5`. More than three fractional digits are
/// rounded to the nearest thousandth.
impl FromStr for Decimal {
    type Err = DecimalParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DecimalParseError(s.to_string());
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if (int_part.is_empty() && frac_part.is_empty())
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(err());
        }
        let int: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| err())? };
        let mut millis: i64 = 0;
        for (i, b) in frac_part.bytes().take(3).enumerate() {
            millis += (b - b'0') as i64 * 10_i64.pow(2 - i as u32);
        }
        if frac_part.len() > 3 && frac_part.as_bytes()[3] >= b'5' {
            millis += 1;
        }
        let total = int.checked_mul(SCALE).and_then(|v| v.checked_add(millis)).ok_or_else(err)?;
        Ok(Decimal(if negative { -total } else { total }))
    }
}

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        f64::deserialize(deserializer).map(Decimal::from_f64)
    }
}
