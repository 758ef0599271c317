use std::collections::{BTreeSet, HashMap};

use aas_core::ambiguity::{CandidatePair, Origin, PairType, RegionRef};
use aas_core::evaluation::adjusted_rand_index;
use aas_core::geometry::{knn, FeatureDistance, PairwiseDistance};
use aas_core::io;
use aas_core::model::Linkage;
use aas_core::np3::{refine, satisfies};
use aas_core::sampler::{draw_batch, marginal, pair_budget, UsWeighting};
use aas_core::{
    Constraint, ConstraintStore, EmbeddingSet, MethodTag, PairKey, Partition, Relation,
};
use proptest::prelude::*;

/// Relation implied by a constraint list: must-links close transitively,
/// a cannot-link separates the two must-link components it touches.
fn brute_closure(n: usize, accepted: &[Constraint]) -> Vec<Vec<Option<Relation>>> {
    let mut comp: Vec<usize> = (0..n).collect();
    loop {
        let mut changed = false;
        for c in accepted.iter().filter(|c| c.relation == Relation::MustLink) {
            let (x, y) = (comp[c.pair.a()], comp[c.pair.b()]);
            if x != y {
                let (lo, hi) = (x.min(y), x.max(y));
                for v in comp.iter_mut() {
                    if *v == hi {
                        *v = lo;
                    }
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let separated: BTreeSet<(usize, usize)> = accepted
        .iter()
        .filter(|c| c.relation == Relation::CannotLink)
        .flat_map(|c| {
            let (x, y) = (comp[c.pair.a()], comp[c.pair.b()]);
            [(x, y), (y, x)]
        })
        .collect();
    (0..n)
        .map(|u| {
            (0..n)
                .map(|v| {
                    if comp[u] == comp[v] {
                        Some(Relation::MustLink)
                    } else if separated.contains(&(comp[u], comp[v])) {
                        Some(Relation::CannotLink)
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect()
}

fn constraint_ops(n: usize) -> impl Strategy<Value = Vec<(usize, usize, bool)>> {
    prop::collection::vec((0..n, 0..n, any::<bool>()), 0..60)
}

fn embeddings(n: usize, dim: usize) -> impl Strategy<Value = EmbeddingSet> {
    prop::collection::vec(prop::collection::vec(0.05f64..1.0, dim), n)
        .prop_map(|rows| EmbeddingSet::from_rows(&rows).unwrap())
}

fn consistent_store(truth: &[usize], picks: &[(usize, usize)]) -> ConstraintStore {
    let mut store = ConstraintStore::new(truth.len());
    for &(u, v) in picks {
        if u == v {
            continue;
        }
        let c = if truth[u] == truth[v] {
            Constraint::must_link(u, v)
        } else {
            Constraint::cannot_link(u, v)
        };
        store.add(c).unwrap();
    }
    store
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn store_closure_matches_brute_force(ops in constraint_ops(12)) {
        let n = 12;
        let mut store = ConstraintStore::new(n);
        let mut accepted = Vec::new();
        for (u, v, ml) in ops {
            if u == v {
                continue;
            }
            let c = if ml { Constraint::must_link(u, v) } else { Constraint::cannot_link(u, v) };
            let before = brute_closure(n, &accepted)[u][v];
            let len_before = store.len();
            match store.add(c) {
                Ok(recorded) => {
                    prop_assert!(before.is_none() || before == Some(c.relation));
                    let duplicate = accepted.iter().any(|a: &Constraint| a.pair == c.pair);
                    prop_assert_eq!(recorded, !duplicate);
                    if recorded {
                        accepted.push(c);
                    }
                }
                Err(e) => {
                    prop_assert!(e.is_contradiction());
                    prop_assert!(before.is_some() && before != Some(c.relation));
                    prop_assert_eq!(store.len(), len_before);
                }
            }
            let closure = brute_closure(n, &accepted);
            for (a, row) in closure.iter().enumerate() {
                for (b, &expected) in row.iter().enumerate().skip(a + 1) {
                    prop_assert_eq!(store.relation_of(PairKey::of(a, b)), expected);
                }
            }
        }
        prop_assert_eq!(store.len(), accepted.len());
    }

    #[test]
    fn partitions_are_canonical(
        labels in prop::collection::vec(0usize..6, 1..40),
        flags in prop::collection::vec(any::<bool>(), 40),
    ) {
        let outliers = flags[..labels.len()].to_vec();
        let p = Partition::new(&labels, outliers.clone(), MethodTag::A).unwrap();
        let mut next = 0;
        for &l in p.labels() {
            prop_assert!(l <= next);
            if l == next {
                next += 1;
            }
        }
        prop_assert_eq!(next, p.num_clusters());
        let sizes = p.clusters();
        for (i, &o) in outliers.iter().enumerate() {
            if o {
                prop_assert_eq!(sizes[p.label(i)].len(), 1);
            }
        }
    }

    #[test]
    fn refine_satisfies_consistent_constraints(
        truth in prop::collection::vec(0usize..5, 2..30),
        start in prop::collection::vec(0usize..4, 30),
        picks in prop::collection::vec((0usize..30, 0usize..30), 0..40),
        e in embeddings(30, 3),
        average in any::<bool>(),
    ) {
        let n = truth.len();
        let picks: Vec<(usize, usize)> = picks.into_iter().map(|(u, v)| (u % n, v % n)).collect();
        let store = consistent_store(&truth, &picks);
        let part = Partition::from_labels(&start[..n], MethodTag::A);
        let e = e.subset(&(0..n).collect::<Vec<_>>()).unwrap();
        let dist = FeatureDistance::cosine(&e).unwrap();
        let linkage = if average { Linkage::Average } else { Linkage::Single };
        let refined = refine(&part, &store, &dist, linkage).unwrap();
        prop_assert!(satisfies(&refined, &store));
        let again = refine(&refined, &store, &dist, linkage).unwrap();
        prop_assert!(again.same_grouping(&refined));
    }

    #[test]
    fn marginal_is_a_distribution_and_draws_are_distinct(
        os_sims in prop::collection::vec(0.0f64..1.0, 0..10),
        us in prop::collection::vec((0.0f64..1.0, 0usize..3, 0usize..4), 0..15),
        eps in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let types = [PairType::InlierInlier, PairType::InlierOutlier, PairType::OutlierOutlier];
        let os: Vec<CandidatePair> = os_sims.iter().enumerate().map(|(i, &s)| CandidatePair {
            pair: PairKey::of(2 * i, 2 * i + 1),
            origin: Origin::Os,
            pair_type: PairType::InlierInlier,
            region: RegionRef::Across(0, 1),
            similarity: s,
        }).collect();
        let base = os.len();
        let us: Vec<CandidatePair> = us.iter().enumerate().map(|(i, &(s, t, r))| CandidatePair {
            pair: PairKey::of(2 * (base + i), 2 * (base + i) + 1),
            origin: Origin::Us,
            pair_type: types[t],
            region: RegionRef::Within(r),
            similarity: s,
        }).collect();
        let total = os.len() + us.len();
        let pool = marginal(os, us, eps, &UsWeighting::default()).unwrap();
        prop_assert_eq!(pool.len(), total);
        if total > 0 {
            let sum: f64 = pool.probabilities().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
        }
        let drawn = draw_batch(&pool, total, seed);
        let distinct: BTreeSet<PairKey> = drawn.iter().copied().collect();
        prop_assert_eq!(distinct.len(), drawn.len());
        let positive = pool.probabilities().filter(|&p| p > 0.0).count();
        prop_assert_eq!(drawn.len(), positive);
    }

    #[test]
    fn pair_budget_is_bounded_and_monotone(n in 2usize..5000, f in 0.0f64..1.0, g in 0.0f64..1.0) {
        let pairs = n * (n - 1) / 2;
        let (lo, hi) = (f.min(g), f.max(g));
        prop_assert!(pair_budget(n, hi) <= pairs);
        prop_assert!(pair_budget(n, lo) <= pair_budget(n, hi));
    }

    #[test]
    fn ari_is_symmetric_bounded_and_label_invariant(
        a in prop::collection::vec(0usize..5, 2..50),
        b in prop::collection::vec(0usize..5, 50),
        shift in 1usize..100,
    ) {
        let b = &b[..a.len()];
        let ab = adjusted_rand_index(&a, b).unwrap();
        let ba = adjusted_rand_index(b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1.0..=1.0 + 1e-12).contains(&ab));
        let renamed: Vec<usize> = a.iter().map(|l| l * 7 + shift).collect();
        prop_assert!((adjusted_rand_index(&a, &renamed).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn knn_lists_are_sorted_and_exclude_self(e in embeddings(15, 4), k in 1usize..14) {
        let dist = FeatureDistance::cosine(&e).unwrap();
        let nn = knn(&dist, k).unwrap();
        for i in 0..e.len() {
            let list = nn.neighbors(i);
            prop_assert_eq!(list.len(), k);
            prop_assert!(list.iter().all(|&(j, _)| j != i));
            prop_assert!(list.windows(2).all(|w| w[0].1 <= w[1].1));
            // Nothing left out is closer than the last kept neighbor.
            let kept: BTreeSet<usize> = list.iter().map(|&(j, _)| j).collect();
            let worst = list[k - 1].1;
            for j in (0..e.len()).filter(|&j| j != i && !kept.contains(&j)) {
                prop_assert!(dist.distance(i, j) >= worst);
            }
        }
    }

    #[test]
    fn files_round_trip(
        e in embeddings(8, 3),
        labels in prop::collection::vec(0usize..3, 8),
        picks in prop::collection::vec((0usize..8, 0usize..8), 0..10),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        io::write_embeddings(&path, &e).unwrap();
        let back = io::read_embeddings(&path).unwrap();
        prop_assert_eq!(back.as_flat(), e.as_flat());
        prop_assert_eq!(back.ids(), e.ids());

        let p = Partition::from_labels(&labels, MethodTag::Refined);
        let ppath = dir.path().join("p.csv");
        io::write_partition(&ppath, &p, &e).unwrap();
        let q = io::read_partition(&ppath, &e, MethodTag::Refined).unwrap();
        prop_assert_eq!(q.labels(), p.labels());

        let truth: Vec<usize> = labels.clone();
        let store = consistent_store(&truth, &picks);
        let cpath = dir.path().join("c.jsonl");
        io::write_constraints(&cpath, store.constraints(), &e).unwrap();
        let cs = io::read_constraints(&cpath, &e).unwrap();
        prop_assert_eq!(cs.as_slice(), store.constraints());
    }
}

#[test]
fn inferred_pairs_complete_the_closure() {
    let mut store = ConstraintStore::new(5);
    store.add(Constraint::must_link(0, 1)).unwrap();
    store.add(Constraint::must_link(1, 2)).unwrap();
    store.add(Constraint::cannot_link(2, 3)).unwrap();
    let inferred: HashMap<PairKey, Relation> = store
        .inferred()
        .into_iter()
        .map(|c| (c.pair, c.relation))
        .collect();
    assert_eq!(inferred[&PairKey::of(0, 2)], Relation::MustLink);
    assert_eq!(inferred[&PairKey::of(0, 3)], Relation::CannotLink);
    assert_eq!(inferred[&PairKey::of(1, 3)], Relation::CannotLink);
    assert!(!inferred.contains_key(&PairKey::of(0, 1)));
    assert!(!inferred.keys().any(|p| p.contains(4)));
}
