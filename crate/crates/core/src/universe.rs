//! Countable universes with a fixed enumeration `u_1, u_2, ...`.
//!
//! Every other module talks about strings through their 1-based position in
//! this enumeration. Pair universes `N x {labels}` are enumerated row-major:
//! index `k` decodes to `(w, y)` with `w = ceil(k / m)` and
//! `y = label_offset + (k - 1) mod m`, so the block `(i-1)m+1 ..= im` holds
//! exactly the pairs whose first coordinate is `i`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based position in the universe enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct UniverseIndex(u64);

impl UniverseIndex {
    pub fn new(k: u64) -> Result<Self> {
        if k == 0 {
            Err(Error::ZeroIndex(k))
        } else {
            Ok(UniverseIndex(k))
        }
    }

    /// Caller guarantees `k >= 1`.
    pub(crate) fn from_raw(k: u64) -> Self {
        debug_assert!(k >= 1, "universe indices are 1-based");
        UniverseIndex(k)
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl TryFrom<u64> for UniverseIndex {
    type Error = Error;

    fn try_from(k: u64) -> Result<Self> {
        UniverseIndex::new(k)
    }
}

impl From<UniverseIndex> for u64 {
    fn from(k: UniverseIndex) -> u64 {
        k.0
    }
}

impl fmt::Display for UniverseIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u_{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum UniverseSpec {
    /// `u_k = k`.
    Naturals {},
    /// `N x {label_offset, ..., label_offset + label_count - 1}`.
    PairNatFinite { label_count: u64, label_offset: i64 },
}

/// Decoded payload of a universe index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UString {
    Nat(u64),
    Pair(u64, i64),
}

impl fmt::Display for UString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UString::Nat(w) => write!(f, "{w}"),
            UString::Pair(w, y) => write!(f, "({w},{y})"),
        }
    }
}

impl UniverseSpec {
    /// The `N x {-1, 0, 1}` universe of the slow-rate construction.
    pub fn signed_ternary() -> Self {
        UniverseSpec::PairNatFinite { label_count: 3, label_offset: -1 }
    }

    /// `N x {first, ..., first + count - 1}`.
    pub fn pairs(label_count: u64, label_offset: i64) -> Self {
        UniverseSpec::PairNatFinite { label_count, label_offset }
    }

    pub fn label_count(&self) -> Option<u64> {
        match self {
            UniverseSpec::Naturals {} => None,
            UniverseSpec::PairNatFinite { label_count, .. } => Some(*label_count),
        }
    }

    pub fn has_label(&self, y: i64) -> bool {
        match self {
            UniverseSpec::Naturals {} => false,
            UniverseSpec::PairNatFinite { label_count, label_offset } => {
                y >= *label_offset && ((y - label_offset) as u64) < *label_count
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            UniverseSpec::PairNatFinite { label_count: 0, .. } => Err(Error::Config(
                "pair universe needs at least one label".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            UniverseSpec::Naturals {} => "N".to_string(),
            UniverseSpec::PairNatFinite { label_count, label_offset } => format!(
                "N x {{{}..={}}}",
                label_offset,
                label_offset + *label_count as i64 - 1
            ),
        }
    }

    pub fn decode(&self, k: UniverseIndex) -> UString {
        let k = k.get();
        match self {
            UniverseSpec::Naturals {} => UString::Nat(k),
            UniverseSpec::PairNatFinite { label_count, label_offset } => {
                let m = *label_count;
                let w = (k - 1) / m + 1;
                let y = label_offset + ((k - 1) % m) as i64;
                UString::Pair(w, y)
            }
        }
    }

    pub fn encode(&self, s: UString) -> Result<UniverseIndex> {
        let malformed = |reason: &str| Error::MalformedString {
            universe: self.describe(),
            reason: reason.to_string(),
        };
        match (self, s) {
            (UniverseSpec::Naturals {}, UString::Nat(w)) => UniverseIndex::new(w),
            (UniverseSpec::PairNatFinite { label_count, label_offset }, UString::Pair(w, y)) => {
                if w < 1 {
                    return Err(malformed("first coordinate must be >= 1"));
                }
                if !self.has_label(y) {
                    return Err(malformed(&format!("label {y} outside the label set")));
                }
                let column = (y - label_offset) as u64;
                (w - 1)
                    .checked_mul(*label_count)
                    .and_then(|v| v.checked_add(column + 1))
                    .map(UniverseIndex::from_raw)
                    .ok_or_else(|| Error::IndexOverflow(format!("({w},{y})")))
            }
            (UniverseSpec::Naturals {}, UString::Pair(..)) => Err(malformed("expected a natural")),
            (UniverseSpec::PairNatFinite { .. }, UString::Nat(_)) => Err(malformed("expected a pair")),
        }
    }

    /// Shorthand for `encode(Pair(w, y))`.
    pub fn pair_index(&self, w: u64, y: i64) -> Result<UniverseIndex> {
        self.encode(UString::Pair(w, y))
    }
}
