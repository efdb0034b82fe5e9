//! Identifier and enum types shared by every module.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// UMLS Concept Unique Identifier: `C` followed by exactly seven digits.
///
/// Stored as the numeric part, so ordering matches lexicographic order of the
/// textual form.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cui(u32);

impl Cui {
    pub const MAX: u32 = 9_999_999;

    pub fn new(number: u32) -> Option<Self> {
        (number <= Self::MAX).then_some(Cui(number))
    }

    pub fn number(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidCui(pub String);

impl fmt::Display for InvalidCui {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid CUI {:?} (expected C followed by 7 digits)", self.0)
    }
}

impl std::error::Error for InvalidCui {}

impl FromStr for Cui {
    type Err = InvalidCui;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = s.as_bytes();
        if bytes.len() != 8 || bytes[0] != b'C' || !bytes[1..].iter().all(u8::is_ascii_digit) {
            return Err(InvalidCui(s.to_string()));
        }
        // seven ASCII digits always fit
        Ok(Cui(s[1..].parse().expect("digits checked")))
    }
}

impl fmt::Display for Cui {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{:07}", self.0)
    }
}

impl fmt::Debug for Cui {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Cui {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cui {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Assertion status of an extracted entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Assertion {
    Present,
    Absent,
    Uncertain,
}

impl Assertion {
    /// Rank used when one concept is asserted differently within a single
    /// report: Present > Uncertain > Absent.
    pub fn dominance(self) -> u8 {
        match self {
            Assertion::Present => 2,
            Assertion::Uncertain => 1,
            Assertion::Absent => 0,
        }
    }

    /// The dominant of two assertions under [`Assertion::dominance`].
    pub fn dominant(self, other: Assertion) -> Assertion {
        if other.dominance() > self.dominance() {
            other
        } else {
            self
        }
    }

    /// Present against Absent, in either order. Uncertain never contradicts.
    pub fn contradicts(self, other: Assertion) -> bool {
        matches!(
            (self, other),
            (Assertion::Present, Assertion::Absent) | (Assertion::Absent, Assertion::Present)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Anatomy,
    Observation,
}
