//! Shared data model.

mod config;
mod constraints;
mod embeddings;
mod partition;

pub use config::{BaseView, Linkage, PairMass, RegionMass, RunConfig, SimilarityMode};
pub use constraints::{Constraint, ConstraintSource, ConstraintStore, Relation};
pub use embeddings::EmbeddingSet;
pub use partition::{MethodTag, Partition};

use serde::{Deserialize, Serialize};

/// Unordered sample pair stored canonically as `(a, b)` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "(usize, usize)", into = "(usize, usize)")]
pub struct PairKey {
    a: usize,
    b: usize,
}

impl PairKey {
    /// Canonicalizes the order. Returns `None` for `u == v`.
    pub fn new(u: usize, v: usize) -> Option<Self> {
        match u.cmp(&v) {
            std::cmp::Ordering::Less => Some(Self { a: u, b: v }),
            std::cmp::Ordering::Greater => Some(Self { a: v, b: u }),
            std::cmp::Ordering::Equal => None,
        }
    }

    /// Panics if `u == v`.
    pub fn of(u: usize, v: usize) -> Self {
        Self::new(u, v).unwrap_or_else(|| panic!("self-pair ({u}, {u})"))
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn contains(&self, i: usize) -> bool {
        self.a == i || self.b == i
    }
}

impl TryFrom<(usize, usize)> for PairKey {
    type Error = String;

    fn try_from((u, v): (usize, usize)) -> Result<Self, Self::Error> {
        PairKey::new(u, v).ok_or_else(|| format!("self-pair ({u}, {v})"))
    }
}

impl From<PairKey> for (usize, usize) {
    fn from(p: PairKey) -> Self {
        (p.a, p.b)
    }
}

impl std::fmt::Display for PairKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_key_is_canonical() {
        assert_eq!(PairKey::of(3, 1), PairKey::of(1, 3));
        assert_eq!(PairKey::of(3, 1).a(), 1);
        assert!(PairKey::new(2, 2).is_none());
    }
}
