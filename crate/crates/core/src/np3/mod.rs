//! Constrained refinement of an arbitrary partition.
//!
//! 1. Clusters joined by a must-link are merged.
//! 2. Each cluster that still holds a cannot-link pair is split: its local
//!    must-link groups become nodes of a conflict graph, the component with
//!    the most greedy colors is colored into fresh labels, and the remaining
//!    components are matched onto those labels by minimum-cost assignment.
//! 3. Labels are renumbered from 0 by first occurrence.

mod coloring;
mod hungarian;

pub use coloring::{greedy_color, Coloring};
pub use hungarian::hungarian;

use std::collections::BTreeMap;

use crate::clustering::UnionFind;
use crate::geometry::{FeatureDistance, PairwiseDistance};
use crate::model::{ConstraintStore, EmbeddingSet, Linkage, MethodTag, PairKey, Partition};
use crate::{par, Error, Result};

/// Virtual "fresh label" columns cost this much more than the largest real
/// cost, so real labels are always used up first.
const VIRTUAL_MARGIN: f64 = 0.1;
const VIRTUAL_FLOOR: f64 = 1e-6;

/// Unions every pair of clusters joined by a must-link constraint.
pub fn merge_must_links(part: &Partition, store: &ConstraintStore) -> Partition {
    let mut uf = UnionFind::new(part.num_clusters());
    for c in store.must_links() {
        uf.union(part.label(c.pair.a()), part.label(c.pair.b()));
    }
    let labels: Vec<usize> = part.labels().iter().map(|&l| uf.find(l)).collect();
    finish(part, &labels, part.method())
}

/// Canonicalizes `labels`, keeping an outlier flag only where the sample is
/// still alone in its cluster.
fn finish(original: &Partition, labels: &[usize], method: MethodTag) -> Partition {
    let mut size: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *size.entry(l).or_default() += 1;
    }
    let outliers = labels
        .iter()
        .enumerate()
        .map(|(i, l)| original.is_outlier(i) && size[l] == 1)
        .collect();
    Partition::new(labels, outliers, method).expect("same length as original")
}

/// One cannot-link group: a connected component of the conflict graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CannotLinkGroup {
    pub id: usize,
    /// Indices into [`ConflictGraph::nodes`], ascending.
    pub nodes: Vec<usize>,
    /// Greedy color per entry of `nodes`.
    pub colors: Vec<usize>,
    pub color_count: usize,
}

/// Must-link groups of one cluster linked by its internal cannot-links.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictGraph {
    /// Sample indices per node, ascending; nodes ordered by first member.
    pub nodes: Vec<Vec<usize>>,
    /// `(i, j)` with `i < j`, deduplicated.
    pub edges: Vec<(usize, usize)>,
    pub groups: Vec<CannotLinkGroup>,
}

/// Conflict graph of a cluster, using only constraints with both ends inside.
pub fn build_conflict_graph(members: &[usize], store: &ConstraintStore) -> Result<ConflictGraph> {
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    let inside = |p: &PairKey| {
        sorted.binary_search(&p.a()).is_ok() && sorted.binary_search(&p.b()).is_ok()
    };
    let mls: Vec<PairKey> = store.must_links().map(|c| c.pair).filter(inside).collect();
    let cls: Vec<PairKey> = store.cannot_links().map(|c| c.pair).filter(inside).collect();
    conflict_graph(&sorted, &mls, &cls)
}

fn conflict_graph(members: &[usize], mls: &[PairKey], cls: &[PairKey]) -> Result<ConflictGraph> {
    let pos = |i: usize| members.binary_search(&i).expect("constraint inside cluster");
    let m = members.len();
    let mut uf = UnionFind::new(m);
    for p in mls {
        uf.union(pos(p.a()), pos(p.b()));
    }
    let mut node_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut nodes: Vec<Vec<usize>> = Vec::new();
    let mut node_of = vec![0usize; m];
    for (x, &sample) in members.iter().enumerate() {
        let root = uf.find(x);
        let node = *node_of_root.entry(root).or_insert_with(|| {
            nodes.push(Vec::new());
            nodes.len() - 1
        });
        nodes[node].push(sample);
        node_of[x] = node;
    }

    let mut edges = Vec::with_capacity(cls.len());
    for p in cls {
        let (u, v) = (node_of[pos(p.a())], node_of[pos(p.b())]);
        if u == v {
            return Err(Error::contradiction(*p, "cannot-link inside a must-link group"));
        }
        edges.push((u.min(v), u.max(v)));
    }
    edges.sort_unstable();
    edges.dedup();

    let mut cuf = UnionFind::new(nodes.len());
    for &(u, v) in &edges {
        cuf.union(u, v);
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for u in 0..nodes.len() {
        by_root.entry(cuf.find(u)).or_default().push(u);
    }
    let mut comps: Vec<Vec<usize>> = by_root.into_values().collect();
    comps.sort_by_key(|c| c[0]);
    let groups = comps
        .into_iter()
        .enumerate()
        .map(|(id, group_nodes)| {
            let local: BTreeMap<usize, usize> = group_nodes
                .iter()
                .enumerate()
                .map(|(k, &u)| (u, k))
                .collect();
            let local_edges: Vec<(usize, usize)> = edges
                .iter()
                .filter(|(u, _)| local.contains_key(u))
                .map(|(u, v)| (local[u], local[v]))
                .collect();
            let coloring = greedy_color(group_nodes.len(), &local_edges);
            CannotLinkGroup {
                id,
                nodes: group_nodes,
                colors: coloring.colors,
                color_count: coloring.count,
            }
        })
        .collect();
    Ok(ConflictGraph {
        nodes,
        edges,
        groups,
    })
}

fn linkage_distance<D: PairwiseDistance + ?Sized>(
    dist: &D,
    node: &[usize],
    label: &[usize],
    linkage: Linkage,
) -> f64 {
    match linkage {
        Linkage::Single => node
            .iter()
            .flat_map(|&u| label.iter().map(move |&v| (u, v)))
            .map(|(u, v)| dist.distance(u, v))
            .fold(f64::INFINITY, f64::min),
        Linkage::Average => {
            let total: f64 = node
                .iter()
                .flat_map(|&u| label.iter().map(move |&v| dist.distance(u, v)))
                .sum();
            total / (node.len() * label.len()) as f64
        }
    }
}

/// Splits one cluster so that none of its internal cannot-links remain.
///
/// Returns a label per member (in the order of `members`) drawn from
/// `next_id..`, and the next unused id.
pub fn purify_cluster<D: PairwiseDistance + ?Sized>(
    members: &[usize],
    store: &ConstraintStore,
    dist: &D,
    linkage: Linkage,
    next_id: usize,
) -> Result<(Vec<usize>, usize)> {
    let graph = build_conflict_graph(members, store)?;
    let by_sample = assign_labels(&graph, dist, linkage, next_id)?;
    let labels = members.iter().map(|i| by_sample[i]).collect();
    let used = by_sample.values().max().map_or(next_id, |m| m + 1);
    Ok((labels, used.max(next_id)))
}

/// Colors the hardest group, then matches the others onto existing labels.
fn assign_labels<D: PairwiseDistance + ?Sized>(
    graph: &ConflictGraph,
    dist: &D,
    linkage: Linkage,
    next_id: usize,
) -> Result<BTreeMap<usize, usize>> {
    let mut order: Vec<&CannotLinkGroup> = graph.groups.iter().collect();
    order.sort_by(|x, y| {
        y.color_count
            .cmp(&x.color_count)
            .then(y.nodes.len().cmp(&x.nodes.len()))
            .then(x.id.cmp(&y.id))
    });
    let Some((hardest, rest)) = order.split_first() else {
        return Ok(BTreeMap::new());
    };

    // label_members[k] holds the samples carrying label next_id + k.
    let mut label_members: Vec<Vec<usize>> = vec![Vec::new(); hardest.color_count];
    for (&node, &color) in hardest.nodes.iter().zip(&hardest.colors) {
        label_members[color].extend(&graph.nodes[node]);
    }

    for group in rest {
        let rows = group.nodes.len();
        let cols = label_members.len();
        let real: Vec<Vec<f64>> = group
            .nodes
            .iter()
            .map(|&node| {
                label_members
                    .iter()
                    .map(|lm| linkage_distance(dist, &graph.nodes[node], lm, linkage))
                    .collect()
            })
            .collect();
        let picks: Vec<usize> = if rows == 1 {
            let row = &real[0];
            let best = (0..cols)
                .min_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)))
                .expect("at least one label");
            vec![best]
        } else {
            let mut cost = real;
            if rows > cols {
                let max = cost.iter().flatten().copied().fold(0.0, f64::max);
                let virtual_cost = max * (1.0 + VIRTUAL_MARGIN) + VIRTUAL_FLOOR;
                for row in &mut cost {
                    row.resize(rows, virtual_cost);
                }
            }
            hungarian(&cost)?.0
        };
        // Virtual columns open fresh labels in the order they were picked.
        let mut fresh: BTreeMap<usize, usize> = BTreeMap::new();
        let mut targets = Vec::with_capacity(rows);
        for &col in &picks {
            let label = if col < cols {
                col
            } else {
                let next = cols + fresh.len();
                *fresh.entry(col).or_insert(next)
            };
            targets.push(label);
        }
        label_members.resize(cols + fresh.len(), Vec::new());
        for (&node, &label) in group.nodes.iter().zip(&targets) {
            label_members[label].extend(&graph.nodes[node]);
        }
    }

    let mut out = BTreeMap::new();
    for (k, samples) in label_members.iter().enumerate() {
        for &s in samples {
            out.insert(s, next_id + k);
        }
    }
    Ok(out)
}

/// Refines `part` so that every must-link pair shares a label and every
/// cannot-link pair does not.
pub fn refine<D: PairwiseDistance + ?Sized>(
    part: &Partition,
    store: &ConstraintStore,
    dist: &D,
    linkage: Linkage,
) -> Result<Partition> {
    if store.num_samples() != part.len() || dist.len() != part.len() {
        return Err(Error::Invalid(format!(
            "partition covers {} samples, constraints {}, distances {}",
            part.len(),
            store.num_samples(),
            dist.len()
        )));
    }
    let merged = merge_must_links(part, store);
    let clusters = merged.clusters();

    let mut mls: BTreeMap<usize, Vec<PairKey>> = BTreeMap::new();
    let mut cls: BTreeMap<usize, Vec<PairKey>> = BTreeMap::new();
    for c in store.must_links() {
        mls.entry(merged.label(c.pair.a())).or_default().push(c.pair);
    }
    for c in store.cannot_links() {
        let (la, lb) = (merged.label(c.pair.a()), merged.label(c.pair.b()));
        if la == lb {
            cls.entry(la).or_default().push(c.pair);
        }
    }
    if cls.is_empty() {
        return Ok(merged.with_method(MethodTag::Refined));
    }

    let impure: Vec<usize> = cls.keys().copied().collect();
    let no_mls = Vec::new();
    let local = par::map_slice(&impure, |&label| {
        let graph = conflict_graph(
            &clusters[label],
            mls.get(&label).unwrap_or(&no_mls),
            &cls[&label],
        )?;
        assign_labels(&graph, dist, linkage, 0)
    });

    let mut labels = merged.labels().to_vec();
    let mut next_id = merged.num_clusters();
    for mapping in local {
        let mapping = mapping?;
        let used = mapping.values().max().map_or(0, |m| m + 1);
        for (sample, l) in mapping {
            labels[sample] = next_id + l;
        }
        next_id += used;
    }
    Ok(finish(&merged, &labels, MethodTag::Refined))
}

/// [`refine`] with cosine distance over the embeddings.
pub fn refine_with_embeddings(
    part: &Partition,
    store: &ConstraintStore,
    e: &EmbeddingSet,
    linkage: Linkage,
) -> Result<Partition> {
    let dist = FeatureDistance::cosine(e)?;
    refine(part, store, &dist, linkage)
}

/// Every must-link co-labeled and every cannot-link separated.
pub fn satisfies(part: &Partition, store: &ConstraintStore) -> bool {
    store.constraints().iter().all(|c| {
        let same = part.label(c.pair.a()) == part.label(c.pair.b());
        match c.relation {
            crate::model::Relation::MustLink => same,
            crate::model::Relation::CannotLink => !same,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Metric;
    use crate::model::Constraint;

    fn store(n: usize, ml: &[(usize, usize)], cl: &[(usize, usize)]) -> ConstraintStore {
        let mut s = ConstraintStore::new(n);
        for &(a, b) in ml {
            s.add(Constraint::must_link(a, b)).unwrap();
        }
        for &(a, b) in cl {
            s.add(Constraint::cannot_link(a, b)).unwrap();
        }
        s
    }

    fn line(xs: &[f64]) -> FeatureDistance {
        let e = EmbeddingSet::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap();
        FeatureDistance::new(&e, Metric::Euclidean).unwrap()
    }

    #[test]
    fn merge_joins_clusters() {
        let p = Partition::from_labels(&[0, 0, 1], MethodTag::A);
        let m = merge_must_links(&p, &store(3, &[(1, 2)], &[]));
        assert_eq!(m.labels(), &[0, 0, 0]);
    }

    #[test]
    fn merge_without_must_links_is_identity() {
        let p = Partition::from_labels(&[2, 0, 1, 0], MethodTag::A);
        assert!(merge_must_links(&p, &store(4, &[], &[(0, 1)])).same_grouping(&p));
    }

    #[test]
    fn merge_chains_to_fixpoint() {
        let p = Partition::from_labels(&[0, 1, 1, 2], MethodTag::A);
        let m = merge_must_links(&p, &store(4, &[(0, 1), (2, 3)], &[]));
        assert_eq!(m.num_clusters(), 1);
    }

    #[test]
    fn merge_clears_outlier_flags() {
        let p = Partition::new(&[0, 1, 2], vec![false, true, true], MethodTag::A).unwrap();
        let m = merge_must_links(&p, &store(3, &[(0, 1)], &[]));
        assert_eq!(m.outliers(), &[false, false, true]);
    }

    #[test]
    fn conflict_graph_matches_hand_construction() {
        let s = store(5, &[(1, 2)], &[(1, 3)]);
        let g = build_conflict_graph(&[1, 2, 3, 4], &s).unwrap();
        assert_eq!(g.nodes, vec![vec![1, 2], vec![3], vec![4]]);
        assert_eq!(g.edges, vec![(0, 1)]);
        assert_eq!(g.groups.len(), 2);
        assert_eq!(g.groups[0].nodes, vec![0, 1]);
        assert_eq!(g.groups[0].color_count, 2);
        assert_eq!(g.groups[1].nodes, vec![2]);
    }

    #[test]
    fn conflict_graph_single_edge_and_clique() {
        let g = build_conflict_graph(&[0, 1], &store(2, &[], &[(0, 1)])).unwrap();
        assert_eq!(g.groups.len(), 1);
        assert_eq!(g.groups[0].color_count, 2);
        let g = build_conflict_graph(&[0, 1, 2], &store(3, &[], &[(0, 1), (1, 2), (0, 2)])).unwrap();
        assert_eq!(g.groups[0].color_count, 3);
    }

    #[test]
    fn conflict_graph_reports_internal_contradiction() {
        // Closure inside the cluster is built only from internal must-links,
        // so feed the raw pieces directly.
        let err = conflict_graph(&[0, 1], &[PairKey::of(0, 1)], &[PairKey::of(0, 1)]).unwrap_err();
        assert!(err.is_contradiction());
    }

    #[test]
    fn purify_sends_free_node_to_nearest_label() {
        // {1,2} at 0/0.1, {3} at 5, free sample 4 at 1 -> nearer {1,2}.
        let s = store(5, &[(1, 2)], &[(1, 3)]);
        let d = line(&[9.0, 0.0, 0.1, 5.0, 1.0]);
        let (labels, next) = purify_cluster(&[1, 2, 3, 4], &s, &d, Linkage::Single, 10).unwrap();
        assert_eq!(labels, vec![10, 10, 11, 10]);
        assert_eq!(next, 12);
        // Move the free sample next to {3}.
        let d = line(&[9.0, 0.0, 0.1, 5.0, 4.5]);
        let (labels, _) = purify_cluster(&[1, 2, 3, 4], &s, &d, Linkage::Single, 10).unwrap();
        assert_eq!(labels, vec![10, 10, 11, 11]);
    }

    #[test]
    fn purify_single_cannot_link() {
        let s = store(2, &[], &[(0, 1)]);
        let (labels, next) = purify_cluster(&[0, 1], &s, &line(&[0.0, 1.0]), Linkage::Single, 0).unwrap();
        assert_eq!(labels, vec![0, 1]);
        assert_eq!(next, 2);
    }

    #[test]
    fn purify_matches_smaller_group_onto_colored_labels() {
        // Path 2-3-4 (3 nodes, 2 colors) outranks the pair 0-1 on node
        // count. Largest degree first: {3} -> color 0, {2} and {4} -> color 1.
        let s = store(5, &[], &[(0, 1), (2, 3), (3, 4)]);
        let d = line(&[0.0, 10.0, 0.5, 9.0, 20.0]);
        let g = build_conflict_graph(&[0, 1, 2, 3, 4], &s).unwrap();
        assert_eq!(g.groups.len(), 2);
        let (labels, next) = purify_cluster(&[0, 1, 2, 3, 4], &s, &d, Linkage::Single, 0).unwrap();
        // 0 (at 0.0) is nearest 2 -> label 1; 1 (at 10.0) is nearest 3 -> label 0.
        assert_eq!(labels, vec![1, 0, 1, 0, 1]);
        assert_eq!(next, 2);
    }

    #[test]
    fn purify_opens_virtual_label_when_short_of_columns() {
        // Triangle 0-1-2 (3 colors) goes first; star 3-{4,5,6} has 4 nodes
        // for only 3 labels, so one node takes a fresh virtual label.
        let s = store(
            7,
            &[],
            &[(0, 1), (1, 2), (0, 2), (3, 4), (3, 5), (3, 6)],
        );
        let d = line(&[0.0, 10.0, 20.0, 50.0, 1.0, 11.0, 21.0]);
        let g = build_conflict_graph(&(0..7).collect::<Vec<_>>(), &s).unwrap();
        let ranked: Vec<_> = g.groups.iter().map(|x| (x.color_count, x.nodes.len())).collect();
        assert_eq!(ranked, vec![(3, 3), (2, 4)]);
        let (labels, next) =
            purify_cluster(&(0..7).collect::<Vec<_>>(), &s, &d, Linkage::Single, 0).unwrap();
        // Leaves 4,5,6 sit next to 0,1,2; hub 3 is far from all of them.
        assert_eq!(labels, vec![0, 1, 2, 3, 0, 1, 2]);
        assert_eq!(next, 4);
    }

    #[test]
    fn refine_without_constraints_is_identity() {
        let p = Partition::from_labels(&[1, 1, 0, 2], MethodTag::A);
        let r = refine(&p, &store(4, &[], &[]), &line(&[0.0, 1.0, 2.0, 3.0]), Linkage::Single).unwrap();
        assert!(r.same_grouping(&p));
        assert_eq!(r.method(), MethodTag::Refined);
    }

    #[test]
    fn refine_splits_and_matches_free_point() {
        // {a,b,c} with CL(a,b); c sits next to b.
        let p = Partition::from_labels(&[0, 0, 0], MethodTag::A);
        let s = store(3, &[], &[(0, 1)]);
        let r = refine(&p, &s, &line(&[0.0, 5.0, 4.0]), Linkage::Single).unwrap();
        assert_eq!(r.labels(), &[0, 1, 1]);
        assert!(satisfies(&r, &s));
    }

    #[test]
    fn refine_fixes_violation_created_by_merge() {
        let p = Partition::from_labels(&[0, 0, 1, 1], MethodTag::A);
        let s = store(4, &[(1, 2)], &[(0, 3), (0, 2)]);
        let r = refine(&p, &s, &line(&[0.0, 1.0, 2.0, 3.0]), Linkage::Single).unwrap();
        assert!(satisfies(&r, &s));
        let again = refine(&r, &s, &line(&[0.0, 1.0, 2.0, 3.0]), Linkage::Single).unwrap();
        assert!(again.same_grouping(&r));
    }

    #[test]
    fn refine_average_linkage_also_satisfies() {
        let p = Partition::from_labels(&[0, 0, 0, 0, 0], MethodTag::A);
        let s = store(5, &[(0, 1)], &[(1, 2), (2, 3)]);
        let r = refine(&p, &s, &line(&[0.0, 1.0, 2.0, 3.0, 4.0]), Linkage::Average).unwrap();
        assert!(satisfies(&r, &s));
    }
}
