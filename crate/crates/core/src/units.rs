//! Fixed-point quantities.
//!
//! Time, distance and speed are stored as integer multiples of 1/1000 of
//! their unit. Interval arithmetic is therefore exact and every run is
//! reproducible bit-for-bit.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of quanta per unit.
pub const SCALE: i64 = 1000;

macro_rules! fixed_point {
    ($name:ident) => {
        #[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(i64);

        impl $name {
            pub const ZERO: $name = $name(0);

            pub const fn from_millis(millis: i64) -> Self {
                $name(millis)
            }

            pub const fn from_units(units: i64) -> Self {
                $name(units * SCALE)
            }

            /// Rounds to the nearest quantum.
            pub fn from_f64(value: f64) -> Self {
                $name((value * SCALE as f64).round() as i64)
            }

            pub const fn millis(self) -> i64 {
                self.0
            }

            pub fn as_f64(self) -> f64 {
                self.0 as f64 / SCALE as f64
            }

            pub fn is_positive(self) -> bool {
                self.0 > 0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let sign = if self.0 < 0 { "-" } else { "" };
                let abs = self.0.unsigned_abs();
                write!(f, "{}{}.{:03}", sign, abs / SCALE as u64, abs % SCALE as u64)
            }
        }

        impl FromStr for $name {
            type Err = ParseQuantityError;

            /// Accepts decimal strings with at most three fractional digits.
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let err = || ParseQuantityError(s.to_string());
                let (neg, body) = match s.strip_prefix('-') {
                    Some(rest) => (true, rest),
                    None => (false, s),
                };
                let (whole, frac) = match body.split_once('.') {
                    Some((w, f)) => (w, f),
                    None => (body, ""),
                };
                if whole.is_empty()
                    || frac.len() > 3
                    || !whole.bytes().all(|b| b.is_ascii_digit())
                    || !frac.bytes().all(|b| b.is_ascii_digit())
                {
                    return Err(err());
                }
                let whole: i64 = whole.parse().map_err(|_| err())?;
                let mut frac_val = 0i64;
                for (i, b) in frac.bytes().enumerate() {
                    frac_val += (b - b'0') as i64 * 10i64.pow(2 - i as u32);
                }
                let v = whole
                    .checked_mul(SCALE)
                    .and_then(|w| w.checked_add(frac_val))
                    .ok_or_else(err)?;
                Ok($name(if neg { -v } else { v }))
            }
        }

        impl Add for $name {
            type Output = $name;
            fn add(self, rhs: $name) -> $name {
                $name(self.0 + rhs.0)
            }
        }

        impl AddAssign for $name {
            fn add_assign(&mut self, rhs: $name) {
                self.0 += rhs.0;
            }
        }

        impl Sub for $name {
            type Output = $name;
            fn sub(self, rhs: $name) -> $name {
                $name(self.0 - rhs.0)
            }
        }

        impl std::iter::Sum for $name {
            fn sum<I: Iterator<Item = $name>>(iter: I) -> $name {
                $name(iter.map(|v| v.0).sum())
            }
        }
    };
}

fixed_point!(Time);
fixed_point!(Distance);
fixed_point!(Speed);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid fixed-point quantity `{0}`")]
pub struct ParseQuantityError(String);

/// Time quantities travel as decimal strings with exactly three fractional
/// digits.
impl Serialize for Time {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Time {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Distances and speeds appear in network files as plain JSON numbers.
macro_rules! numeric_serde {
    ($name:ident) => {
        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                if self.0 % SCALE == 0 {
                    serializer.serialize_i64(self.0 / SCALE)
                } else {
                    serializer.serialize_f64(self.as_f64())
                }
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let v = f64::deserialize(deserializer)?;
                if !v.is_finite() {
                    return Err(serde::de::Error::custom("non-finite quantity"));
                }
                Ok($name::from_f64(v))
            }
        }
    };
}

numeric_serde!(Distance);
numeric_serde!(Speed);

/// Time needed to cover `distance` at `speed`, rounded up to the next quantum.
pub fn travel_time(distance: Distance, speed: Speed) -> Time {
    debug_assert!(speed.is_positive());
    let num = distance.0 as i128 * SCALE as i128;
    let den = speed.0 as i128;
    Time(div_ceil(num, den) as i64)
}

/// Time to cover `part` of a span that takes `whole_time` for `whole`
/// distance, rounded up. Used for positions strictly inside an edge.
pub fn partial_time(part: Distance, whole: Distance, whole_time: Time) -> Time {
    debug_assert!(whole.is_positive());
    let num = part.0 as i128 * whole_time.0 as i128;
    Time(div_ceil(num, whole.0 as i128) as i64)
}

fn div_ceil(num: i128, den: i128) -> i128 {
    let q = num / den;
    if (num % den != 0) && ((num < 0) == (den < 0)) {
        q + 1
    } else {
        q
    }
}

/// Half-open interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: Time,
    pub end: Time,
}

impl Interval {
    pub fn new(start: Time, end: Time) -> Self {
        debug_assert!(start < end, "empty interval [{start}, {end})");
        Interval { start, end }
    }

    /// Nonempty intersection; touching endpoints do not intersect.
    pub fn intersects(&self, other: &Interval) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn covering(&self, other: &Interval) -> Interval {
        Interval {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }

    pub fn duration(&self) -> Time {
        self.end - self.start
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}
