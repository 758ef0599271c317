//! The two clustering views: DBSCAN (density) and FINCH (first neighbors).

use crate::geometry::{dot, FeatureDistance, Metric, PairwiseDistance};
use crate::model::{EmbeddingSet, MethodTag, Partition};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_samples: usize,
}

impl DbscanParams {
    pub fn new(eps: f64, min_samples: usize) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::Invalid(format!("dbscan eps must be positive, got {eps}")));
        }
        if min_samples == 0 {
            return Err(Error::Invalid("dbscan min_samples must be >= 1".into()));
        }
        Ok(Self { eps, min_samples })
    }
}

/// DBSCAN over any pairwise distance.
///
/// A point is core when at least `min_samples` points (itself included) lie
/// within `eps`. Core points within `eps` of each other share a cluster. A
/// border point joins the cluster of its lowest-index core neighbor. The rest
/// are outliers, each placed in its own singleton cluster with the outlier
/// flag set.
pub fn dbscan<D: PairwiseDistance + ?Sized>(dist: &D, params: DbscanParams) -> Partition {
    let n = dist.len();
    let neighborhoods: Vec<Vec<usize>> = par::map_range(n, |i| {
        (0..n)
            .filter(|&j| j == i || dist.distance(i, j) <= params.eps)
            .collect()
    });
    let core: Vec<bool> = neighborhoods
        .iter()
        .map(|nb| nb.len() >= params.min_samples)
        .collect();

    let mut uf = UnionFind::new(n);
    for i in (0..n).filter(|&i| core[i]) {
        for &j in neighborhoods[i].iter().filter(|&&j| j > i && core[j]) {
            uf.union(i, j);
        }
    }

    let mut labels = vec![0usize; n];
    let mut outliers = vec![false; n];
    for i in 0..n {
        if core[i] {
            labels[i] = uf.find(i);
        } else if let Some(&c) = neighborhoods[i].iter().find(|&&j| core[j]) {
            // Neighborhoods are ascending, so this is the lowest-index claim.
            labels[i] = uf.find(c);
        } else {
            outliers[i] = true;
        }
    }
    Partition::new(&labels, outliers, MethodTag::A).expect("n >= 1")
}

/// Partitions from finest (level 0) to coarsest.
#[derive(Debug, Clone, PartialEq)]
pub struct FinchHierarchy {
    levels: Vec<Partition>,
}

impl FinchHierarchy {
    pub fn levels(&self) -> &[Partition] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn select_view(&self, level: usize) -> Result<Partition> {
        self.levels
            .get(level)
            .map(|p| p.clone().with_method(MethodTag::B))
            .ok_or(Error::LevelOutOfRange {
                level,
                levels: self.levels.len(),
            })
    }
}

/// Index of each row's nearest other row, ties to the lower index.
pub fn first_neighbors<D: PairwiseDistance + ?Sized>(dist: &D) -> Vec<usize> {
    let n = dist.len();
    par::map_range(n, |i| {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in (0..n).filter(|&j| j != i) {
            let d = dist.distance(i, j);
            if d < best.0 {
                best = (d, j);
            }
        }
        best.1
    })
}

/// Connected components of the first-neighbor graph: `i ~ j` when one is the
/// other's first neighbor or both share a first neighbor.
pub fn first_neighbor_components(first: &[usize]) -> Vec<usize> {
    let mut uf = UnionFind::new(first.len());
    for (i, &j) in first.iter().enumerate() {
        // Sharing a first neighbor is implied: both link to it.
        uf.union(i, j);
    }
    (0..first.len()).map(|i| uf.find(i)).collect()
}

/// FINCH: level 0 links samples by first neighbors; each further level
/// repeats on cluster means until a single cluster remains.
pub fn finch(e: &EmbeddingSet, metric: Metric) -> Result<FinchHierarchy> {
    if e.len() < 2 {
        return Err(Error::Invalid("finch needs at least two samples".into()));
    }
    let dist = FeatureDistance::new(e, metric)?;
    let level0 = Partition::from_labels(
        &first_neighbor_components(&first_neighbors(&dist)),
        MethodTag::B,
    );
    let mut levels = vec![level0];
    loop {
        let current = levels.last().expect("non-empty");
        let k = current.num_clusters();
        if k <= 1 {
            break;
        }
        let means = MeanDistance::new(e, current, metric);
        let merged = first_neighbor_components(&first_neighbors(&means));
        let labels: Vec<usize> = current.labels().iter().map(|&l| merged[l]).collect();
        let next = Partition::from_labels(&labels, MethodTag::B);
        if next.num_clusters() >= k {
            break;
        }
        levels.push(next);
    }
    Ok(FinchHierarchy { levels })
}

struct MeanDistance {
    means: Vec<Vec<f64>>,
    metric: Metric,
}

impl MeanDistance {
    fn new(e: &EmbeddingSet, p: &Partition, metric: Metric) -> Self {
        let k = p.num_clusters();
        let mut sums = vec![vec![0.0; e.dim()]; k];
        let mut counts = vec![0usize; k];
        for i in 0..e.len() {
            let l = p.label(i);
            counts[l] += 1;
            for (s, &x) in sums[l].iter_mut().zip(e.row(i)) {
                *s += f64::from(x);
            }
        }
        for (s, &c) in sums.iter_mut().zip(&counts) {
            s.iter_mut().for_each(|x| *x /= c as f64);
            if metric == Metric::Cosine {
                let norm = dot(s, s).sqrt();
                if norm > 0.0 {
                    s.iter_mut().for_each(|x| *x /= norm);
                }
            }
        }
        Self { means: sums, metric }
    }
}

impl PairwiseDistance for MeanDistance {
    fn len(&self) -> usize {
        self.means.len()
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        let (u, v) = (&self.means[i], &self.means[j]);
        match self.metric {
            // A zero mean has zero dot with everything: distance 1.
            Metric::Cosine => (1.0 - dot(u, v)).clamp(0.0, 2.0),
            Metric::Euclidean => u
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Union-find with union by size and path halving.
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub(crate) fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> EmbeddingSet {
        EmbeddingSet::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    fn euclid(e: &EmbeddingSet) -> FeatureDistance {
        FeatureDistance::new(e, Metric::Euclidean).unwrap()
    }

    #[test]
    fn dbscan_dense_run_plus_outlier() {
        let e = line(&[0.0, 0.1, 0.2, 10.0]);
        let p = dbscan(&euclid(&e), DbscanParams::new(0.5, 2).unwrap());
        assert_eq!(p.labels(), &[0, 0, 0, 1]);
        assert_eq!(p.outliers(), &[false, false, false, true]);
    }

    #[test]
    fn dbscan_identical_points_form_one_cluster() {
        let e = line(&[3.0; 5]);
        let p = dbscan(&euclid(&e), DbscanParams::new(0.1, 5).unwrap());
        assert_eq!(p.num_clusters(), 1);
        assert!(p.outliers().iter().all(|&o| !o));
    }

    #[test]
    fn dbscan_tiny_eps_gives_all_outliers() {
        let e = line(&[0.0, 1.0, 2.5, 7.0]);
        let p = dbscan(&euclid(&e), DbscanParams::new(0.5, 2).unwrap());
        assert_eq!(p.num_clusters(), 4);
        assert!(p.outliers().iter().all(|&o| o));
    }

    #[test]
    fn dbscan_border_goes_to_lowest_core() {
        // 2 is a border point within reach of core 1 (left group) and core 3
        // (right group); the left group's core has the lower index.
        let e = line(&[0.0, 0.5, 1.0, 1.5, 2.0]);
        let p = dbscan(&euclid(&e), DbscanParams::new(0.5, 3).unwrap());
        // cores: 1 (0,1,2), 2 (1,2,3), 3 (2,3,4) -> all core, chained.
        assert_eq!(p.num_clusters(), 1);
        // Border 0.8 is within eps of core 0.4 (index 2) and core 1.2
        // (index 4), which are not density-connected.
        let e = line(&[0.0, 0.1, 0.4, 0.8, 1.2, 1.5, 1.6]);
        let p = dbscan(&euclid(&e), DbscanParams::new(0.45, 4).unwrap());
        assert_eq!(p.labels(), &[0, 0, 0, 0, 1, 1, 1]);
        assert!(p.outliers().iter().all(|&o| !o));
    }

    #[test]
    fn dbscan_rejects_bad_params() {
        assert!(DbscanParams::new(0.0, 2).is_err());
        assert!(DbscanParams::new(f64::NAN, 2).is_err());
        assert!(DbscanParams::new(1.0, 0).is_err());
    }

    #[test]
    fn finch_two_pairs_on_a_line() {
        let e = line(&[0.0, 1.0, 10.0, 11.0]);
        let h = finch(&e, Metric::Euclidean).unwrap();
        assert_eq!(h.levels()[0].labels(), &[0, 0, 1, 1]);
        assert_eq!(h.num_levels(), 2);
        assert_eq!(h.select_view(1).unwrap().num_clusters(), 1);
        assert_eq!(h.select_view(0).unwrap().method(), MethodTag::B);
        assert!(matches!(
            h.select_view(2),
            Err(Error::LevelOutOfRange { level: 2, levels: 2 })
        ));
    }

    #[test]
    fn finch_two_samples_single_cluster() {
        let e = line(&[1.0, 4.0]);
        let h = finch(&e, Metric::Euclidean).unwrap();
        assert_eq!(h.levels()[0].num_clusters(), 1);
        assert_eq!(h.num_levels(), 1);
    }

    #[test]
    fn finch_equilateral_triangle_is_one_cluster() {
        let s = 3f64.sqrt() / 2.0;
        let e = EmbeddingSet::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, s]]).unwrap();
        // f32 storage perturbs equality slightly; the tie rule or the
        // perturbation links everything either way.
        let h = finch(&e, Metric::Euclidean).unwrap();
        assert_eq!(h.levels()[0].num_clusters(), 1);
        // Exact ties resolved by index: 0->1, 1->0, 2->0.
        assert_eq!(first_neighbor_components(&[1, 0, 0]), vec![
            first_neighbor_components(&[1, 0, 0])[0];
            3
        ]);
    }

    #[test]
    fn finch_rejects_single_sample() {
        assert!(finch(&line(&[1.0]), Metric::Euclidean).is_err());
    }
}
