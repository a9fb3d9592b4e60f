// SPDX-License-Identifier: Apache-2.0

//! Value and time primitives shared by every module.
//!
//! Bid values are carried as integer wei end to end. Ratios derived from them
//! (R values, uplifts, burn increases) stay exact as [`Fraction`]s until they
//! are rendered.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Wei per ether.
pub const WEI_PER_ETH: u128 = 1_000_000_000_000_000_000;

/// Exact signed rational used for uplifts and other derived ratios.
pub type Fraction = Ratio<i128>;

/// Renders a fraction for presentation. Lossy.
pub fn fraction_to_f64(f: &Fraction) -> f64 {
    *f.numer() as f64 / *f.denom() as f64
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UnitsError {
    #[error("wei arithmetic overflow")]
    Overflow,
    #[error("wei arithmetic underflow")]
    Underflow,
    #[error("invalid wei amount {0:?}")]
    InvalidAmount(String),
    #[error("slot time {0} ms outside [-12000, 12000]")]
    SlotTimeOutOfRange(i64),
}

/// A non-negative amount of wei.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeiAmount(u128);

impl WeiAmount {
    pub const ZERO: WeiAmount = WeiAmount(0);

    pub const fn from_wei(wei: u128) -> Self {
        WeiAmount(wei)
    }

    pub const fn wei(self) -> u128 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Parses a decimal ether amount such as `"0.077"` into exact wei.
    /// At most 18 fractional digits are accepted.
    pub fn from_eth_str(s: &str) -> Result<Self, UnitsError> {
        let bad = || UnitsError::InvalidAmount(s.to_string());
        let (int, frac) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if frac.len() > 18 {
            return Err(bad());
        }
        let int_wei = if int.is_empty() {
            0
        } else {
            int.parse::<u128>()
                .map_err(|_| bad())?
                .checked_mul(WEI_PER_ETH)
                .ok_or(UnitsError::Overflow)?
        };
        let frac_wei = if frac.is_empty() {
            0
        } else {
            let scale = 10u128.pow(18 - frac.len() as u32);
            frac.parse::<u128>().map_err(|_| bad())? * scale
        };
        int_wei.checked_add(frac_wei).map(WeiAmount).ok_or(UnitsError::Overflow)
    }

    /// Whole ether, lossy.
    pub fn as_eth_f64(self) -> f64 {
        self.0 as f64 / WEI_PER_ETH as f64
    }

    pub fn checked_add(self, rhs: WeiAmount) -> Result<WeiAmount, UnitsError> {
        self.0.checked_add(rhs.0).map(WeiAmount).ok_or(UnitsError::Overflow)
    }

    pub fn checked_sub(self, rhs: WeiAmount) -> Result<WeiAmount, UnitsError> {
        self.0.checked_sub(rhs.0).map(WeiAmount).ok_or(UnitsError::Underflow)
    }

    pub fn checked_mul(self, factor: u128) -> Result<WeiAmount, UnitsError> {
        self.0.checked_mul(factor).map(WeiAmount).ok_or(UnitsError::Overflow)
    }

    /// Scales by a non-negative rational, flooring to whole wei.
    pub fn checked_mul_ratio(self, ratio: &Ratio<u128>) -> Result<WeiAmount, UnitsError> {
        // a * n / d == (a / d) * n + (a % d) * n / d, which avoids forming a * n.
        let (n, d) = (*ratio.numer(), *ratio.denom());
        let whole = (self.0 / d).checked_mul(n).ok_or(UnitsError::Overflow)?;
        let part = (self.0 % d).checked_mul(n).ok_or(UnitsError::Overflow)? / d;
        whole.checked_add(part).map(WeiAmount).ok_or(UnitsError::Overflow)
    }

    /// Signed view for use in [`Fraction`] arithmetic.
    pub fn to_i128(self) -> Result<i128, UnitsError> {
        i128::try_from(self.0).map_err(|_| UnitsError::Overflow)
    }
}

impl fmt::Display for WeiAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for WeiAmount {
    type Err = UnitsError;

    /// Decimal wei, digits only. Signs, whitespace and exponents are rejected.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(UnitsError::InvalidAmount(s.to_string()));
        }
        s.parse::<u128>().map(WeiAmount).map_err(|_| UnitsError::Overflow)
    }
}

impl Serialize for WeiAmount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for WeiAmount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Milliseconds relative to the start of a slot. Negative values are before the
/// slot boundary; the auction opens one slot ahead.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct SlotTimeMs(i64);

impl SlotTimeMs {
    pub const MIN_MS: i64 = -12_000;
    pub const MAX_MS: i64 = 12_000;
    pub const ZERO: SlotTimeMs = SlotTimeMs(0);
    pub const MIN: SlotTimeMs = SlotTimeMs(Self::MIN_MS);
    pub const MAX: SlotTimeMs = SlotTimeMs(Self::MAX_MS);

    pub fn new(ms: i64) -> Result<Self, UnitsError> {
        if (Self::MIN_MS..=Self::MAX_MS).contains(&ms) {
            Ok(SlotTimeMs(ms))
        } else {
            Err(UnitsError::SlotTimeOutOfRange(ms))
        }
    }

    /// For constants; panics (at compile time in const context) when out of range.
    pub const fn from_ms(ms: i64) -> Self {
        assert!(ms >= Self::MIN_MS && ms <= Self::MAX_MS, "slot time out of range");
        SlotTimeMs(ms)
    }

    /// Clamps into the valid range.
    pub fn saturating(ms: i64) -> Self {
        SlotTimeMs(ms.clamp(Self::MIN_MS, Self::MAX_MS))
    }

    pub const fn ms(self) -> i64 {
        self.0
    }

    pub fn saturating_add_ms(self, ms: i64) -> Self {
        Self::saturating(self.0.saturating_add(ms))
    }
}

impl fmt::Display for SlotTimeMs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

impl<'de> Deserialize<'de> for SlotTimeMs {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ms = i64::deserialize(deserializer)?;
        SlotTimeMs::new(ms).map_err(serde::de::Error::custom)
    }
}
