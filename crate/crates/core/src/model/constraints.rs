use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::PairKey;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "ml")]
    MustLink,
    #[serde(rename = "cl")]
    CannotLink,
}

impl Relation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Relation::MustLink => "ml",
            Relation::CannotLink => "cl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintSource {
    Oracle,
    Seed,
    /// Derivable from the closure of paid constraints; only produced on export.
    Inferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub pair: PairKey,
    pub relation: Relation,
    pub source: ConstraintSource,
    pub cycle: usize,
}

impl Constraint {
    pub fn oracle(pair: PairKey, relation: Relation, cycle: usize) -> Self {
        Self {
            pair,
            relation,
            source: ConstraintSource::Oracle,
            cycle,
        }
    }

    pub fn must_link(u: usize, v: usize) -> Self {
        Self {
            pair: PairKey::of(u, v),
            relation: Relation::MustLink,
            source: ConstraintSource::Seed,
            cycle: 0,
        }
    }

    pub fn cannot_link(u: usize, v: usize) -> Self {
        Self {
            pair: PairKey::of(u, v),
            relation: Relation::CannotLink,
            source: ConstraintSource::Seed,
            cycle: 0,
        }
    }
}

/// Accumulated must-link / cannot-link answers with their transitive closure.
///
/// Must-links are kept in a union-find (union by size, no path compression,
/// so queries need only `&self`). Cannot-links are edges between component
/// roots and are re-pointed whenever two components merge.
#[derive(Debug, Clone)]
pub struct ConstraintStore {
    n: usize,
    constraints: Vec<Constraint>,
    direct: HashMap<PairKey, Relation>,
    parent: Vec<usize>,
    size: Vec<usize>,
    cl_edges: HashMap<usize, BTreeSet<usize>>,
    components: usize,
}

impl ConstraintStore {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            constraints: Vec::new(),
            direct: HashMap::new(),
            parent: (0..n).collect(),
            size: vec![1; n],
            cl_edges: HashMap::new(),
            components: n,
        }
    }

    pub fn num_samples(&self) -> usize {
        self.n
    }

    /// Every accepted constraint in insertion order.
    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn must_links(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints
            .iter()
            .filter(|c| c.relation == Relation::MustLink)
    }

    pub fn cannot_links(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints
            .iter()
            .filter(|c| c.relation == Relation::CannotLink)
    }

    pub fn num_ml_components(&self) -> usize {
        self.components
    }

    /// Representative of the must-link component containing `i`.
    pub fn ml_root(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    /// Closed relation of a pair, `None` when neither is derivable.
    pub fn relation_of(&self, p: PairKey) -> Option<Relation> {
        let (ra, rb) = (self.ml_root(p.a()), self.ml_root(p.b()));
        if ra == rb {
            Some(Relation::MustLink)
        } else if self.cl_edges.get(&ra).is_some_and(|s| s.contains(&rb)) {
            Some(Relation::CannotLink)
        } else {
            None
        }
    }

    /// Adds a constraint and updates the closure.
    ///
    /// Returns `Ok(true)` when the constraint was recorded, `Ok(false)` when
    /// the same pair/relation was already present. A constraint that
    /// contradicts the closure is rejected and leaves the store unchanged.
    pub fn add(&mut self, c: Constraint) -> Result<bool> {
        let p = c.pair;
        if p.b() >= self.n {
            return Err(Error::Invalid(format!(
                "pair {p} out of range for {} samples",
                self.n
            )));
        }
        if let Some(&existing) = self.direct.get(&p) {
            if existing == c.relation {
                return Ok(false);
            }
            return Err(Error::contradiction(p, "both must-link and cannot-link"));
        }
        match (self.relation_of(p), c.relation) {
            (Some(Relation::MustLink), Relation::CannotLink) => {
                return Err(Error::contradiction(
                    p,
                    "cannot-link inside a must-link component",
                ))
            }
            (Some(Relation::CannotLink), Relation::MustLink) => {
                return Err(Error::contradiction(
                    p,
                    "must-link across an existing cannot-link",
                ))
            }
            _ => {}
        }
        let (ra, rb) = (self.ml_root(p.a()), self.ml_root(p.b()));
        match c.relation {
            Relation::MustLink if ra != rb => self.union(ra, rb),
            Relation::CannotLink if ra != rb => {
                self.cl_edges.entry(ra).or_default().insert(rb);
                self.cl_edges.entry(rb).or_default().insert(ra);
            }
            _ => {}
        }
        self.direct.insert(p, c.relation);
        self.constraints.push(c);
        Ok(true)
    }

    fn union(&mut self, ra: usize, rb: usize) {
        let (keep, gone) = if self.size[ra] >= self.size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[gone] = keep;
        self.size[keep] += self.size[gone];
        self.components -= 1;
        if let Some(neighbors) = self.cl_edges.remove(&gone) {
            for other in neighbors {
                let set = self.cl_edges.get_mut(&other).expect("symmetric edge");
                set.remove(&gone);
                set.insert(keep);
                self.cl_edges.entry(keep).or_default().insert(other);
            }
        }
    }

    /// Pairs whose relation follows from the closure but was never stated
    /// directly, tagged [`ConstraintSource::Inferred`]. Quadratic in the
    /// component sizes involved.
    pub fn inferred(&self) -> Vec<Constraint> {
        let mut members: HashMap<usize, Vec<usize>> = HashMap::new();
        for i in 0..self.n {
            members.entry(self.ml_root(i)).or_default().push(i);
        }
        let mut roots: Vec<usize> = members.keys().copied().collect();
        roots.sort_unstable();
        let mut out = Vec::new();
        let mut push = |u: usize, v: usize, relation: Relation| {
            let pair = PairKey::of(u, v);
            if !self.direct.contains_key(&pair) {
                out.push(Constraint {
                    pair,
                    relation,
                    source: ConstraintSource::Inferred,
                    cycle: 0,
                });
            }
        };
        for &r in &roots {
            let m = &members[&r];
            for (x, &u) in m.iter().enumerate() {
                for &v in &m[x + 1..] {
                    push(u, v, Relation::MustLink);
                }
            }
            if let Some(neighbors) = self.cl_edges.get(&r) {
                for &s in neighbors.iter().filter(|&&s| s > r) {
                    for &u in m {
                        for &v in &members[&s] {
                            push(u, v, Relation::CannotLink);
                        }
                    }
                }
            }
        }
        out.sort_by_key(|c| c.pair);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(s: &ConstraintStore, u: usize, v: usize) -> Option<Relation> {
        s.relation_of(PairKey::of(u, v))
    }

    #[test]
    fn must_link_is_transitive() {
        let mut s = ConstraintStore::new(5);
        s.add(Constraint::must_link(1, 2)).unwrap();
        s.add(Constraint::must_link(2, 3)).unwrap();
        assert_eq!(rel(&s, 1, 3), Some(Relation::MustLink));
    }

    #[test]
    fn cannot_link_propagates_through_must_link() {
        let mut s = ConstraintStore::new(5);
        s.add(Constraint::must_link(1, 2)).unwrap();
        s.add(Constraint::cannot_link(2, 3)).unwrap();
        assert_eq!(rel(&s, 1, 3), Some(Relation::CannotLink));
    }

    #[test]
    fn direct_conflict_is_rejected() {
        let mut s = ConstraintStore::new(5);
        s.add(Constraint::must_link(1, 2)).unwrap();
        let err = s.add(Constraint::cannot_link(1, 2)).unwrap_err();
        assert!(err.is_contradiction());
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn must_link_across_cannot_link_is_rejected() {
        let mut s = ConstraintStore::new(5);
        s.add(Constraint::must_link(0, 1)).unwrap();
        s.add(Constraint::cannot_link(1, 2)).unwrap();
        s.add(Constraint::must_link(2, 3)).unwrap();
        assert!(s.add(Constraint::must_link(0, 3)).unwrap_err().is_contradiction());
        assert!(s.add(Constraint::cannot_link(2, 3)).unwrap_err().is_contradiction());
    }

    #[test]
    fn empty_store_knows_nothing() {
        let s = ConstraintStore::new(2);
        assert_eq!(rel(&s, 0, 1), None);
    }

    #[test]
    fn relation_through_two_components() {
        let mut s = ConstraintStore::new(5);
        s.add(Constraint::must_link(0, 1)).unwrap();
        s.add(Constraint::cannot_link(1, 3)).unwrap();
        s.add(Constraint::must_link(3, 4)).unwrap();
        assert_eq!(rel(&s, 0, 4), Some(Relation::CannotLink));
        assert_eq!(rel(&s, 0, 2), None);
    }

    #[test]
    fn duplicates_are_idempotent() {
        let mut s = ConstraintStore::new(3);
        assert!(s.add(Constraint::must_link(0, 1)).unwrap());
        assert!(!s.add(Constraint::must_link(1, 0)).unwrap());
        assert_eq!(s.len(), 1);
        assert_eq!(s.num_ml_components(), 2);
    }

    #[test]
    fn out_of_range_pair_is_invalid() {
        let mut s = ConstraintStore::new(3);
        assert!(matches!(
            s.add(Constraint::must_link(0, 3)),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn inferred_lists_only_closure_pairs() {
        let mut s = ConstraintStore::new(4);
        s.add(Constraint::must_link(0, 1)).unwrap();
        s.add(Constraint::must_link(1, 2)).unwrap();
        s.add(Constraint::cannot_link(2, 3)).unwrap();
        let inf: Vec<_> = s.inferred().iter().map(|c| (c.pair, c.relation)).collect();
        assert_eq!(
            inf,
            vec![
                (PairKey::of(0, 2), Relation::MustLink),
                (PairKey::of(0, 3), Relation::CannotLink),
                (PairKey::of(1, 3), Relation::CannotLink),
            ]
        );
    }
}
