//! Fixed-point money. All ledger arithmetic is exact in integer ticks;
//! one currency unit is 10 000 ticks.

use std::fmt;
use std::iter::Sum;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of ticks per whole currency unit (tick = 10^-4 units).
pub const TICKS_PER_UNIT: u64 = 10_000;

/// A non-negative quantity of money in ticks.
///
/// Used for balances, channel capacities, fees and payment amounts alike;
/// none of them is ever negative, so the representation is unsigned and
/// subtraction is checked.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Amount {
    ticks: u64,
}

impl Amount {
    pub const ZERO: Amount = Amount { ticks: 0 };

    pub const fn from_ticks(ticks: u64) -> Self {
        Amount { ticks }
    }

    /// Whole currency units, e.g. `Amount::from_units(1000)` == 1000.0000.
    pub const fn from_units(units: u64) -> Self {
        Amount {
            ticks: units * TICKS_PER_UNIT,
        }
    }

    pub const fn ticks(self) -> u64 {
        self.ticks
    }

    pub const fn is_zero(self) -> bool {
        self.ticks == 0
    }

    pub fn checked_add(self, other: Amount) -> Option<Amount> {
        self.ticks.checked_add(other.ticks).map(Amount::from_ticks)
    }

    pub fn checked_sub(self, other: Amount) -> Option<Amount> {
        self.ticks.checked_sub(other.ticks).map(Amount::from_ticks)
    }

}

impl std::ops::Add for Amount {
    type Output = Amount;

    fn add(self, rhs: Amount) -> Amount {
        self.checked_add(rhs).expect("amount overflow")
    }
}

impl std::ops::AddAssign for Amount {
    fn add_assign(&mut self, rhs: Amount) {
        *self = *self + rhs;
    }
}

impl std::ops::Sub for Amount {
    type Output = Amount;

    fn sub(self, rhs: Amount) -> Amount {
        self.checked_sub(rhs).expect("amount underflow")
    }
}

impl std::ops::SubAssign for Amount {
    fn sub_assign(&mut self, rhs: Amount) {
        *self = *self - rhs;
    }
}

impl Sum for Amount {
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Amount {
        iter.fold(Amount::ZERO, |acc, a| acc + a)
    }
}

impl<'a> Sum<&'a Amount> for Amount {
    fn sum<I: Iterator<Item = &'a Amount>>(iter: I) -> Amount {
        iter.copied().sum()
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{:04}",
            self.ticks / TICKS_PER_UNIT,
            self.ticks % TICKS_PER_UNIT
        )
    }
}

impl fmt::Debug for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Amount({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseAmountError {
    #[error("empty amount")]
    Empty,
    #[error("invalid amount `{0}`")]
    Invalid(String),
    #[error("amount `{0}` has more than 4 fractional digits")]
    TooPrecise(String),
    #[error("amount `{0}` out of range")]
    OutOfRange(String),
}

impl FromStr for Amount {
    type Err = ParseAmountError;

    /// Parses a decimal amount such as `"0.41"`, `"1000"` or `"19.1060"`.
    /// At most 4 fractional digits; negative values are rejected.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseAmountError::Empty);
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(ParseAmountError::Invalid(s.to_string()));
        }
        if frac_part.len() > 4 {
            return Err(ParseAmountError::TooPrecise(s.to_string()));
        }
        let digits_ok =
            |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
        if !int_part.is_empty() && !digits_ok(int_part) {
            return Err(ParseAmountError::Invalid(s.to_string()));
        }
        if !frac_part.is_empty() && !digits_ok(frac_part) {
            return Err(ParseAmountError::Invalid(s.to_string()));
        }
        let units: u64 = if int_part.is_empty() {
            0
        } else {
            int_part
                .parse()
                .map_err(|_| ParseAmountError::OutOfRange(s.to_string()))?
        };
        let mut frac: u64 = 0;
        for b in frac_part.bytes() {
            frac = frac * 10 + u64::from(b - b'0');
        }
        frac *= 10u64.pow(4 - frac_part.len() as u32);
        units
            .checked_mul(TICKS_PER_UNIT)
            .and_then(|t| t.checked_add(frac))
            .map(Amount::from_ticks)
            .ok_or_else(|| ParseAmountError::OutOfRange(s.to_string()))
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An exact rational fee rate, e.g. 1/200 for a 0.5 % proportional fee.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeeRate {
    num: u64,
    den: u64,
}

impl FeeRate {
    pub const ZERO: FeeRate = FeeRate { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Option<FeeRate> {
        if den == 0 {
            return None;
        }
        let g = gcd(num, den).max(1);
        Some(FeeRate {
            num: num / g,
            den: den / g,
        })
    }

    pub const fn numerator(self) -> u64 {
        self.num
    }

    pub const fn denominator(self) -> u64 {
        self.den
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    /// `ceil(rate * amount)` in ticks. Ceiling keeps the rate forwarder-favorable:
    /// a nonzero rate on a nonzero amount never rounds down to a zero fee.
    pub fn apply_ceil(self, amount: Amount) -> Amount {
        let num = u128::from(self.num)
            .checked_mul(u128::from(amount.ticks()))
            .expect("fee numerator overflow");
        Amount::from_ticks(ceil_div(num, u128::from(self.den)))
    }

    /// `ceil(rate * amount * scale_num / scale_den)` in ticks, all in exact
    /// integer arithmetic. Used for the imbalance-adjusted fee.
    pub fn apply_scaled_ceil(self, amount: Amount, scale_num: u64, scale_den: u64) -> Amount {
        assert!(scale_den > 0, "zero denominator in fee scaling");
        let num = u128::from(self.num)
            .checked_mul(u128::from(amount.ticks()))
            .and_then(|n| n.checked_mul(u128::from(scale_num)))
            .expect("fee numerator overflow");
        let den = u128::from(self.den)
            .checked_mul(u128::from(scale_den))
            .expect("fee denominator overflow");
        Amount::from_ticks(ceil_div(num, den))
    }
}

impl Default for FeeRate {
    /// 0.5 % — one part in two hundred.
    fn default() -> Self {
        FeeRate { num: 1, den: 200 }
    }
}

impl fmt::Display for FeeRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid fee rate `{0}`")]
pub struct ParseFeeRateError(String);

impl FromStr for FeeRate {
    type Err = ParseFeeRateError;

    /// Accepts either a fraction (`"1/200"`) or a decimal (`"0.005"`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ParseFeeRateError(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let num: u64 = n.trim().parse().map_err(|_| bad())?;
            let den: u64 = d.trim().parse().map_err(|_| bad())?;
            return FeeRate::new(num, den).ok_or_else(bad);
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if frac_part.len() > 18 {
            return Err(bad());
        }
        let digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if !digits(int_part) || !digits(frac_part) {
            return Err(bad());
        }
        let den = 10u64.pow(frac_part.len() as u32);
        let int: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        let frac: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| bad())?
        };
        let num = int.checked_mul(den).and_then(|n| n.checked_add(frac)).ok_or_else(bad)?;
        FeeRate::new(num, den).ok_or_else(bad)
    }
}

impl Serialize for FeeRate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FeeRate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn ceil_div(num: u128, den: u128) -> u64 {
    let q = num / den + u128::from(!num.is_multiple_of(den));
    u64::try_from(q).expect("fee exceeds amount range")
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
