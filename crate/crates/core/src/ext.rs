use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A real number or +∞.
///
/// Rates and log-MGFs legitimately take the value +∞ (outside the MGF domain,
/// or when a sample has a single sign), so they get a dedicated type instead of
/// an `f64::INFINITY` that silently turns into NaN under subtraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInfinity,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Maps `f64::INFINITY` to `PosInfinity`; NaN and -∞ are passed through as finite
    /// values only in debug-free builds, so callers must not feed them.
    pub fn from_f64(x: f64) -> Self {
        debug_assert!(!x.is_nan(), "NaN cannot be an extended real");
        if x == f64::INFINITY {
            ExtReal::PosInfinity
        } else {
            ExtReal::Finite(x)
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_infinite(self) -> bool {
        !self.is_finite()
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::PosInfinity => None,
        }
    }

    /// Lossy conversion for printing and plotting.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(x) => x,
            ExtReal::PosInfinity => f64::INFINITY,
        }
    }

    /// Panics on +∞. Use only where finiteness has already been established.
    pub fn unwrap(self) -> f64 {
        self.finite().expect("extended real is +inf")
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal::from_f64(x)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::PosInfinity) => Some(Ordering::Less),
            (ExtReal::PosInfinity, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::PosInfinity, ExtReal::PosInfinity) => Some(Ordering::Equal),
        }
    }
}

impl PartialEq<f64> for ExtReal {
    fn eq(&self, other: &f64) -> bool {
        self.to_f64() == *other
    }
}

impl PartialOrd<f64> for ExtReal {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        self.to_f64().partial_cmp(other)
    }
}

impl std::ops::Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::from_f64(a + b),
            _ => ExtReal::PosInfinity,
        }
    }
}

impl std::ops::Add<f64> for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: f64) -> ExtReal {
        self + ExtReal::Finite(rhs)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => fmt::Display::fmt(x, f),
            ExtReal::PosInfinity => f.write_str("inf"),
        }
    }
}

// Serialized as a number, or the string "inf".
impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(x) => s.serialize_f64(*x),
            ExtReal::PosInfinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(ExtReal::from_f64(x)),
            Repr::Str(s) if s == "inf" || s == "+inf" => Ok(ExtReal::PosInfinity),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("not an extended real: {s}"))),
        }
    }
}
