use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const NANOS: u64 = 1_000_000_000;

/// Exact USD amount in units of 10^-9 dollars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Usd(u64);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid USD amount `{0}`")]
pub struct UsdParseError(String);

impl Usd {
    pub const ZERO: Usd = Usd(0);

    pub fn from_nanos(n: u64) -> Usd {
        Usd(n)
    }

    pub fn nanos(self) -> u64 {
        self.0
    }

    /// Cost of `tokens` at `self` per 1000 tokens, rounded half up.
    pub fn per_1k(self, tokens: u64) -> Usd {
        let n = (self.0 as u128 * tokens as u128 + 500) / 1000;
        Usd(n as u64)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / NANOS as f64
    }
}

impl std::ops::Add for Usd {
    type Output = Usd;
    fn add(self, rhs: Usd) -> Usd {
        Usd(self.0 + rhs.0)
    }
}

impl std::iter::Sum for Usd {
    fn sum<I: Iterator<Item = Usd>>(iter: I) -> Usd {
        iter.fold(Usd::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Usd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / NANOS;
        let frac = self.0 % NANOS;
        if frac == 0 {
            return write!(f, "{whole}");
        }
        let digits = format!("{frac:09}");
        write!(f, "{whole}.{}", digits.trim_end_matches('0'))
    }
}

impl FromStr for Usd {
    type Err = UsdParseError;
    fn from_str(s: &str) -> Result<Usd, UsdParseError> {
        let err = || UsdParseError(s.to_string());
        let (whole, frac) = s.trim().split_once('.').unwrap_or((s.trim(), ""));
        if whole.is_empty() && frac.is_empty() || frac.len() > 9 {
            return Err(err());
        }
        let all_digits = |t: &str| t.chars().all(|c| c.is_ascii_digit());
        if !all_digits(whole) || !all_digits(frac) {
            return Err(err());
        }
        let w: u64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| err())? };
        let f: u64 = if frac.is_empty() { 0 } else { format!("{frac:0<9}").parse().map_err(|_| err())? };
        w.checked_mul(NANOS).and_then(|n| n.checked_add(f)).map(Usd).ok_or_else(err)
    }
}

impl Serialize for Usd {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Usd {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Usd, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
