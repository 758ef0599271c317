use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which clustering produced a partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodTag {
    /// Density view (DBSCAN).
    A,
    /// First-neighbor view (FINCH).
    B,
    Refined,
}

/// A cluster assignment over all samples.
///
/// Labels are always canonical: consecutive from 0 in order of first
/// occurrence. Outlier-flagged samples sit in singleton clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    outliers: Vec<bool>,
    method: MethodTag,
}

impl Partition {
    /// Canonicalizes arbitrary labels. Outlier-flagged samples sharing a
    /// label with anything else are split off into their own singletons.
    pub fn new(labels: &[usize], outliers: Vec<bool>, method: MethodTag) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Invalid("partition over zero samples".into()));
        }
        if outliers.len() != labels.len() {
            return Err(Error::Invalid(format!(
                "{} outlier flags for {} labels",
                outliers.len(),
                labels.len()
            )));
        }
        // Key outliers apart from every regular label.
        let keyed: Vec<(usize, bool)> = labels
            .iter()
            .zip(&outliers)
            .enumerate()
            .map(|(i, (&l, &o))| if o { (i, true) } else { (l, false) })
            .collect();
        let labels = canonical_labels(&keyed);
        Ok(Self {
            labels,
            outliers,
            method,
        })
    }

    pub fn from_labels(labels: &[usize], method: MethodTag) -> Self {
        Self::new(labels, vec![false; labels.len()], method).expect("non-empty labels")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn outliers(&self) -> &[bool] {
        &self.outliers
    }

    pub fn is_outlier(&self, i: usize) -> bool {
        self.outliers[i]
    }

    pub fn method(&self) -> MethodTag {
        self.method
    }

    pub fn with_method(mut self, method: MethodTag) -> Self {
        self.method = method;
        self
    }

    pub fn num_clusters(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Members of each cluster, indexed by label, each ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Same grouping of samples, ignoring label names and outlier flags.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        // Both sides are canonical, so equal groupings have equal labels.
        self.labels == other.labels
    }
}

/// Renumbers arbitrary hashable labels to `0..k` by first occurrence.
pub(crate) fn canonical_labels<L: std::hash::Hash + Eq + Copy>(labels: &[L]) -> Vec<usize> {
    let mut map: HashMap<L, usize> = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renumbers_by_first_occurrence() {
        let p = Partition::from_labels(&[7, 7, 3, 9, 3], MethodTag::A);
        assert_eq!(p.labels(), &[0, 0, 1, 2, 1]);
        assert_eq!(p.num_clusters(), 3);
    }

    #[test]
    fn outliers_become_singletons() {
        let p = Partition::new(&[0, 0, 0], vec![false, true, true], MethodTag::A).unwrap();
        assert_eq!(p.labels(), &[0, 1, 2]);
        assert!(p.is_outlier(2));
    }

    #[test]
    fn grouping_comparison_ignores_names() {
        let p = Partition::from_labels(&[5, 5, 1], MethodTag::A);
        let q = Partition::from_labels(&[0, 0, 4], MethodTag::Refined);
        assert!(p.same_grouping(&q));
        let r = Partition::from_labels(&[0, 1, 1], MethodTag::A);
        assert!(!p.same_grouping(&r));
    }

    #[test]
    fn rejects_empty() {
        assert!(Partition::new(&[], vec![], MethodTag::A).is_err());
    }
}
