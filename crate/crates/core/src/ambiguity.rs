//! Regions where the two clustering views disagree, and the candidate pairs
//! drawn from them.
//!
//! A region is a connected component of the bipartite graph linking a view-A
//! cluster to a view-B cluster whenever they partially overlap
//! (`0 < IoU < 1`). Pairs *across* regions (between medoids) target
//! over-segmentation; pairs *inside* a region target under-segmentation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::clustering::UnionFind;
use crate::geometry::{PairwiseDistance, SimilarityMatrix};
use crate::model::{ConstraintStore, EmbeddingSet, PairKey, Partition};
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UncertaintyRegion {
    pub id: usize,
    /// Ascending sample indices.
    pub members: Vec<usize>,
    pub clusters_a: Vec<usize>,
    pub clusters_b: Vec<usize>,
    pub medoid: usize,
}

impl UncertaintyRegion {
    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    /// Across regions (over-segmentation).
    Os,
    /// Inside one region (under-segmentation).
    Us,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairType {
    InlierInlier,
    InlierOutlier,
    OutlierOutlier,
}

impl PairType {
    pub fn from_flags(u_outlier: bool, v_outlier: bool) -> Self {
        match (u_outlier, v_outlier) {
            (false, false) => PairType::InlierInlier,
            (true, true) => PairType::OutlierOutlier,
            _ => PairType::InlierOutlier,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionRef {
    Within(usize),
    Across(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePair {
    pub pair: PairKey,
    pub origin: Origin,
    pub pair_type: PairType,
    pub region: RegionRef,
    pub similarity: f64,
}

/// `|A ∩ B| / |A ∪ B|` over ascending index lists.
pub fn cluster_iou(a: &[usize], b: &[usize]) -> f64 {
    let inter = sorted_intersection_len(a, b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        return 0.0;
    }
    inter as f64 / union as f64
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Regions of uncertainty between two views, ordered by smallest member.
/// Medoids minimize the summed distance to the other members (ties to the
/// lower index).
pub fn find_uncertainty_regions<D: PairwiseDistance + ?Sized>(
    part_a: &Partition,
    part_b: &Partition,
    dist: &D,
) -> Result<Vec<UncertaintyRegion>> {
    let n = part_a.len();
    if part_b.len() != n || dist.len() != n {
        return Err(Error::Invalid(format!(
            "views cover {} and {} samples, distance covers {}",
            n,
            part_b.len(),
            dist.len()
        )));
    }
    let (ka, kb) = (part_a.num_clusters(), part_b.num_clusters());
    let size_a = cluster_sizes(part_a);
    let size_b = cluster_sizes(part_b);
    let mut overlap: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for i in 0..n {
        *overlap.entry((part_a.label(i), part_b.label(i))).or_default() += 1;
    }
    // Nodes 0..ka are A clusters, ka..ka+kb are B clusters.
    let mut uf = UnionFind::new(ka + kb);
    let mut has_edge = vec![false; ka + kb];
    for (&(ca, cb), &inter) in &overlap {
        let iou = inter as f64 / (size_a[ca] + size_b[cb] - inter) as f64;
        if iou < 1.0 {
            uf.union(ca, ka + cb);
            has_edge[ca] = true;
            has_edge[ka + cb] = true;
        }
    }

    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let ca = part_a.label(i);
        if has_edge[ca] {
            by_root.entry(uf.find(ca)).or_default().push(i);
        }
    }
    let mut groups: Vec<Vec<usize>> = by_root.into_values().collect();
    groups.sort_by_key(|m| m[0]);

    let medoids = par::map_slice(&groups, |members| medoid(members, dist));
    Ok(groups
        .into_iter()
        .zip(medoids)
        .enumerate()
        .map(|(id, (members, medoid))| {
            let clusters_a: BTreeSet<usize> = members.iter().map(|&i| part_a.label(i)).collect();
            let clusters_b: BTreeSet<usize> = members.iter().map(|&i| part_b.label(i)).collect();
            UncertaintyRegion {
                id,
                members,
                clusters_a: clusters_a.into_iter().collect(),
                clusters_b: clusters_b.into_iter().collect(),
                medoid,
            }
        })
        .collect())
}

fn cluster_sizes(p: &Partition) -> Vec<usize> {
    let mut s = vec![0; p.num_clusters()];
    for &l in p.labels() {
        s[l] += 1;
    }
    s
}

/// Member with the smallest total distance to the others.
pub fn medoid<D: PairwiseDistance + ?Sized>(members: &[usize], dist: &D) -> usize {
    let mut best = (f64::INFINITY, usize::MAX);
    for &u in members {
        let total: f64 = members.iter().map(|&v| dist.distance(u, v)).sum();
        if total < best.0 {
            best = (total, u);
        }
    }
    best.1
}

/// Medoid pairs across regions: each medoid's `k_max` most similar medoids
/// (ties to the lower region id), kept when `sim >= s_min` and the pair's
/// relation is still unknown.
pub fn build_os_pool(
    regions: &[UncertaintyRegion],
    sim: &SimilarityMatrix,
    k_max: usize,
    s_min: f64,
    outliers: &[bool],
    store: Option<&ConstraintStore>,
) -> Vec<CandidatePair> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for r in regions {
        let mut peers: Vec<(f64, usize)> = regions
            .iter()
            .filter(|q| q.id != r.id)
            .map(|q| (sim.get(r.medoid, q.medoid), q.id))
            .collect();
        peers.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        for &(s, qid) in peers.iter().take(k_max) {
            if s < s_min {
                continue;
            }
            let q = &regions[qid];
            let pair = PairKey::of(r.medoid, q.medoid);
            if store.is_some_and(|st| st.relation_of(pair).is_some()) || !seen.insert(pair) {
                continue;
            }
            out.push(CandidatePair {
                pair,
                origin: Origin::Os,
                pair_type: PairType::from_flags(outliers[pair.a()], outliers[pair.b()]),
                region: RegionRef::Across(r.id.min(qid), r.id.max(qid)),
                similarity: s,
            });
        }
    }
    out
}

/// Pairs grouped together by exactly one of the two views inside the region.
pub fn inconsistent_pairs(
    region: &UncertaintyRegion,
    part_a: &Partition,
    part_b: &Partition,
) -> BTreeSet<PairKey> {
    let m = &region.members;
    let mut out = BTreeSet::new();
    for (x, &u) in m.iter().enumerate() {
        for &v in &m[x + 1..] {
            let same_a = part_a.label(u) == part_a.label(v);
            let same_b = part_b.label(u) == part_b.label(v);
            if same_a != same_b {
                out.insert(PairKey::of(u, v));
            }
        }
    }
    out
}

/// For each view and each pair of distinct clusters inside the region, the
/// closest cross-cluster sample pair (ties to the smallest pair key).
pub fn candidate_closest_pairs<D: PairwiseDistance + ?Sized>(
    region: &UncertaintyRegion,
    part_a: &Partition,
    part_b: &Partition,
    dist: &D,
) -> BTreeSet<PairKey> {
    let m = &region.members;
    let mut best: [HashMap<(usize, usize), (f64, PairKey)>; 2] = [HashMap::new(), HashMap::new()];
    for (x, &u) in m.iter().enumerate() {
        for &v in &m[x + 1..] {
            let pair = PairKey::of(u, v);
            let mut d = None;
            for (slot, view) in [part_a, part_b].into_iter().enumerate() {
                let (lu, lv) = (view.label(u), view.label(v));
                if lu == lv {
                    continue;
                }
                let dv = *d.get_or_insert_with(|| dist.distance(u, v));
                let key = (lu.min(lv), lu.max(lv));
                // Members ascend, so pairs arrive in key order: strict `<`
                // keeps the smallest key among ties.
                best[slot]
                    .entry(key)
                    .and_modify(|cur| {
                        if dv < cur.0 {
                            *cur = (dv, pair);
                        }
                    })
                    .or_insert((dv, pair));
            }
        }
    }
    best.iter()
        .flat_map(|m| m.values().map(|&(_, p)| p))
        .collect()
}

/// Non-redundant inconsistent pairs per region: `Ĩ_k ∩ P_k^cand`.
pub fn build_us_pool<D: PairwiseDistance + ?Sized>(
    regions: &[UncertaintyRegion],
    part_a: &Partition,
    part_b: &Partition,
    dist: &D,
    sim: &SimilarityMatrix,
    store: Option<&ConstraintStore>,
) -> Vec<CandidatePair> {
    let per_region = par::map_slice(regions, |r| {
        let inconsistent = inconsistent_pairs(r, part_a, part_b);
        let candidates = candidate_closest_pairs(r, part_a, part_b, dist);
        inconsistent
            .intersection(&candidates)
            .filter(|&&p| store.is_none_or(|st| st.relation_of(p).is_none()))
            .map(|&pair| CandidatePair {
                pair,
                origin: Origin::Us,
                pair_type: PairType::from_flags(
                    part_a.is_outlier(pair.a()),
                    part_a.is_outlier(pair.b()),
                ),
                region: RegionRef::Within(r.id),
                similarity: sim.get(pair.a(), pair.b()),
            })
            .collect::<Vec<_>>()
    });
    per_region.concat()
}

/// Both pools plus the regions they came from.
#[derive(Debug, Clone)]
pub struct Pools {
    pub regions: Vec<UncertaintyRegion>,
    pub os: Vec<CandidatePair>,
    pub us: Vec<CandidatePair>,
}

/// Regions plus both pools. `part_a` is the density view whose outlier
/// flags type the pairs; `dist` ranks medoids and closest pairs.
pub fn build_pools<D: PairwiseDistance + ?Sized>(
    part_a: &Partition,
    part_b: &Partition,
    dist: &D,
    sim: &SimilarityMatrix,
    k_max: usize,
    s_min: f64,
    store: Option<&ConstraintStore>,
) -> Result<Pools> {
    let regions = find_uncertainty_regions(part_a, part_b, dist)?;
    let os = build_os_pool(&regions, sim, k_max, s_min, part_a.outliers(), store);
    let us = build_us_pool(&regions, part_a, part_b, dist, sim, store);
    Ok(Pools { regions, os, us })
}

#[derive(Debug, Serialize)]
struct AuditLine<'a> {
    a: &'a str,
    b: &'a str,
    origin: Origin,
    pair_type: PairType,
    region: RegionRef,
    similarity: f64,
}

/// Pool audit as JSON Lines: `{"a","b","origin","pair_type","region","similarity"}`.
pub fn encode_pool_audit<'a>(
    pairs: impl IntoIterator<Item = &'a CandidatePair>,
    e: &EmbeddingSet,
) -> Vec<u8> {
    let lines: Vec<AuditLine> = pairs
        .into_iter()
        .map(|c| AuditLine {
            a: e.id(c.pair.a()),
            b: e.id(c.pair.b()),
            origin: c.origin,
            pair_type: c.pair_type,
            region: c.region,
            similarity: c.similarity,
        })
        .collect();
    crate::io::encode_jsonl(&lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FeatureDistance, Metric};
    use crate::model::{Constraint, MethodTag, SimilarityMode};

    fn view(labels: &[usize]) -> Partition {
        Partition::from_labels(labels, MethodTag::A)
    }

    fn line(xs: &[f64]) -> FeatureDistance {
        let e = EmbeddingSet::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap();
        FeatureDistance::new(&e, Metric::Euclidean).unwrap()
    }

    #[test]
    fn iou_reference_values() {
        assert_eq!(cluster_iou(&[1, 2, 3], &[2, 3, 4]), 0.5);
        assert_eq!(cluster_iou(&[1, 2], &[1, 2]), 1.0);
        assert_eq!(cluster_iou(&[1, 2], &[3]), 0.0);
    }

    #[test]
    fn chained_overlaps_form_one_region() {
        // Samples 1..=5 at indices 0..=4 (sample 0 unused, kept as its own
        // agreeing cluster).
        let a = view(&[9, 0, 0, 0, 1, 1]);
        let b = view(&[9, 0, 0, 1, 1, 1]);
        let d = line(&[100.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let regions = find_uncertainty_regions(&a, &b, &d).unwrap();
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].members, vec![1, 2, 3, 4, 5]);
        assert_eq!(regions[0].medoid, 3);
        assert_eq!(regions[0].clusters_a.len(), 2);
    }

    #[test]
    fn identical_views_have_no_regions() {
        let a = view(&[0, 0, 1, 2, 2]);
        let d = line(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(find_uncertainty_regions(&a, &a, &d).unwrap().is_empty());
    }

    #[test]
    fn split_pair_is_a_region() {
        let a = view(&[0, 0]);
        let b = view(&[0, 1]);
        let d = line(&[0.0, 1.0]);
        let regions = find_uncertainty_regions(&a, &b, &d).unwrap();
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].members, vec![0, 1]);
    }

    fn region(id: usize, members: Vec<usize>, medoid: usize) -> UncertaintyRegion {
        UncertaintyRegion {
            id,
            members,
            clusters_a: vec![],
            clusters_b: vec![],
            medoid,
        }
    }

    fn sim_from(n: usize, entries: &[(usize, usize, f64)]) -> SimilarityMatrix {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        for &(i, j, s) in entries {
            v[i * n + j] = s;
            v[j * n + i] = s;
        }
        SimilarityMatrix::from_dense(n, v, SimilarityMode::KReciprocalJaccard).unwrap()
    }

    #[test]
    fn os_pool_threshold() {
        let regions = vec![region(0, vec![0], 0), region(1, vec![1], 1)];
        let flags = [false; 2];
        let pool = build_os_pool(&regions, &sim_from(2, &[(0, 1, 0.5)]), 5, 0.3, &flags, None);
        assert_eq!(pool.len(), 1);
        assert_eq!(pool[0].pair, PairKey::of(0, 1));
        assert_eq!(pool[0].region, RegionRef::Across(0, 1));
        let pool = build_os_pool(&regions, &sim_from(2, &[(0, 1, 0.1)]), 5, 0.3, &flags, None);
        assert!(pool.is_empty());
    }

    #[test]
    fn os_pool_k_max_one() {
        // Nearest medoid by hand: 0->1 (0.9), 1->0 (0.9), 2->3 (0.8), 3->2 (0.8).
        let regions: Vec<_> = (0..4).map(|i| region(i, vec![i], i)).collect();
        let sim = sim_from(
            4,
            &[(0, 1, 0.9), (0, 2, 0.5), (0, 3, 0.4), (1, 2, 0.6), (1, 3, 0.35), (2, 3, 0.8)],
        );
        let pool = build_os_pool(&regions, &sim, 1, 0.3, &[false; 4], None);
        let pairs: Vec<_> = pool.iter().map(|c| c.pair).collect();
        assert_eq!(pairs, vec![PairKey::of(0, 1), PairKey::of(2, 3)]);
    }

    #[test]
    fn os_pool_skips_known_pairs() {
        let regions = vec![region(0, vec![0], 0), region(1, vec![1], 1)];
        let mut store = ConstraintStore::new(2);
        store.add(Constraint::cannot_link(0, 1)).unwrap();
        let pool = build_os_pool(
            &regions,
            &sim_from(2, &[(0, 1, 0.5)]),
            5,
            0.3,
            &[false; 2],
            Some(&store),
        );
        assert!(pool.is_empty());
    }

    #[test]
    fn inconsistent_pairs_symmetric_difference() {
        let a = view(&[0, 0, 0]);
        let b = view(&[0, 0, 1]);
        let r = region(0, vec![0, 1, 2], 1);
        let got: Vec<_> = inconsistent_pairs(&r, &a, &b).into_iter().collect();
        assert_eq!(got, vec![PairKey::of(0, 2), PairKey::of(1, 2)]);
        assert!(inconsistent_pairs(&r, &a, &a).is_empty());
    }

    #[test]
    fn inconsistent_pairs_full_split_vs_full_merge() {
        let m = 6;
        let a = view(&(0..m).collect::<Vec<_>>());
        let b = view(&vec![0; m]);
        let r = region(0, (0..m).collect(), 0);
        assert_eq!(inconsistent_pairs(&r, &a, &b).len(), m * (m - 1) / 2);
    }

    #[test]
    fn closest_pairs_per_cluster_pair() {
        // B has {0,1} and {2}; d(1,2) < d(0,2).
        let a = view(&[0, 0, 0]);
        let b = view(&[0, 0, 1]);
        let d = line(&[0.0, 1.0, 1.5]);
        let r = region(0, vec![0, 1, 2], 1);
        let got: Vec<_> = candidate_closest_pairs(&r, &a, &b, &d).into_iter().collect();
        assert_eq!(got, vec![PairKey::of(1, 2)]);
        // Both views split identically: one pair after union.
        let got = candidate_closest_pairs(&r, &b, &b, &d);
        assert_eq!(got.len(), 1);
    }

    #[test]
    fn us_pool_keeps_only_the_closest_inconsistent_pair() {
        // A merges {x1,x2,x4} with {x6}; B separates them. Only the closest
        // cross pair survives.
        let a = view(&[0, 0, 0, 0]);
        let b = view(&[0, 0, 0, 1]);
        let d = line(&[0.0, 1.0, 2.0, 2.5]);
        let r = region(0, vec![0, 1, 2, 3], 1);
        let sim = sim_from(4, &[]);
        let pool = build_us_pool(&[r], &a, &b, &d, &sim, None);
        let pairs: Vec<_> = pool.iter().map(|c| c.pair).collect();
        assert_eq!(pairs, vec![PairKey::of(2, 3)]);
    }

    #[test]
    fn us_pool_types_from_outlier_flags() {
        let a = Partition::new(&[0, 1], vec![true, true], MethodTag::A).unwrap();
        let b = view(&[0, 0]);
        let d = line(&[0.0, 1.0]);
        let regions = find_uncertainty_regions(&a, &b, &d).unwrap();
        let pool = build_us_pool(&regions, &a, &b, &d, &sim_from(2, &[]), None);
        assert_eq!(pool.len(), 1);
        assert_eq!(pool[0].pair_type, PairType::OutlierOutlier);
    }

    #[test]
    fn us_pool_empty_when_views_agree_inside() {
        let a = view(&[0, 0, 1]);
        let r = region(0, vec![0, 1, 2], 0);
        let pool = build_us_pool(&[r], &a, &a, &line(&[0.0, 1.0, 2.0]), &sim_from(3, &[]), None);
        assert!(pool.is_empty());
    }
}
