use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{build_pools, CandidatePair, Origin, UncertaintyRegion};
use crate::clustering::{dbscan, finch, DbscanParams};
use crate::geometry::{similarity, FeatureDistance, Metric, SimilarityMatrix};
use crate::model::{BaseView, ConstraintStore, EmbeddingSet, PairKey, Partition, RunConfig};
use crate::np3;
use crate::sampler::{marginal, pair_budget, BatchSampler, QueryRecord, UsWeighting, WeightedPairPool};
use crate::Result;

/// How the cycle picks pairs to annotate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Disagreement-driven pools with the mixture distribution.
    Aas,
    /// Uniformly random unordered pairs (the control).
    UniformRandom,
}

/// Both clustering views plus the similarity they were built from.
#[derive(Debug, Clone)]
pub struct Views {
    pub similarity: SimilarityMatrix,
    pub dbscan: Partition,
    pub finch: Partition,
}

impl Views {
    pub fn compute(e: &EmbeddingSet, config: &RunConfig) -> Result<Self> {
        let similarity = similarity(e, config.similarity_mode, config.knn_k, config.dense_threshold)?;
        let params = DbscanParams::new(config.dbscan_eps, config.dbscan_min_samples)?;
        let dbscan = dbscan(&similarity.as_distance(), params);
        let finch = if e.len() >= 2 {
            let hierarchy = finch(e, Metric::Cosine)?;
            let level = config.finch_level.min(hierarchy.num_levels() - 1);
            hierarchy.select_view(level)?
        } else {
            Partition::from_labels(&[0], crate::model::MethodTag::B)
        };
        Ok(Self {
            similarity,
            dbscan,
            finch,
        })
    }

    pub fn base(&self, which: BaseView) -> &Partition {
        match which {
            BaseView::Dbscan => &self.dbscan,
            BaseView::Finch => &self.finch,
        }
    }
}

/// Per-cycle seed derived from the run seed.
pub fn cycle_seed(run_seed: u64, cycle: usize) -> u64 {
    run_seed ^ (cycle as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

enum Source {
    Weighted {
        pool: WeightedPairPool,
        sampler: BatchSampler,
    },
    Uniform {
        rng: ChaCha8Rng,
        n: usize,
        drawn: HashSet<PairKey>,
    },
}

/// Everything one annotation cycle needs before answers arrive: the views,
/// the pools, the budget and a seeded stream of candidate queries.
///
/// The stream order depends only on the pool and seed, never on answers, so
/// a driver that resolves queries one at a time and a service that queues
/// them up front see the same sequence.
pub struct CyclePlan {
    pub cycle: usize,
    pub seed: u64,
    pub budget: usize,
    pub base: Partition,
    pub regions: Vec<UncertaintyRegion>,
    pub pool_os: usize,
    pub pool_us: usize,
    pool_audit: Vec<CandidatePair>,
    source: Source,
}

impl CyclePlan {
    pub fn prepare(
        e: &EmbeddingSet,
        store: &ConstraintStore,
        config: &RunConfig,
        strategy: Strategy,
        cycle: usize,
    ) -> Result<Self> {
        let seed = cycle_seed(config.rng_seed, cycle);
        let budget = pair_budget(e.len(), config.budget_fraction_per_cycle);
        let views = Views::compute(e, config)?;
        let base = views.base(config.base_view).clone();
        match strategy {
            Strategy::UniformRandom => Ok(Self {
                cycle,
                seed,
                budget,
                base,
                regions: Vec::new(),
                pool_os: 0,
                pool_us: 0,
                pool_audit: Vec::new(),
                source: Source::Uniform {
                    rng: ChaCha8Rng::seed_from_u64(seed),
                    n: e.len(),
                    drawn: HashSet::new(),
                },
            }),
            Strategy::Aas => {
                let dist = FeatureDistance::cosine(e)?;
                // Existing answers are applied to both views first.
                let view_a = np3::refine(&views.dbscan, store, &dist, config.linkage)?;
                let view_b = np3::refine(&views.finch, store, &dist, config.linkage)?;
                let pools = build_pools(
                    &view_a,
                    &view_b,
                    &dist,
                    &views.similarity,
                    config.k_max,
                    config.s_min,
                    Some(store),
                )?;
                let (pool_os, pool_us) = (pools.os.len(), pools.us.len());
                let pool = marginal(pools.os, pools.us, config.epsilon, &UsWeighting::from(config))?;
                let pool_audit = pool.entries().iter().map(|&(c, _)| c).collect();
                let sampler = BatchSampler::new(&pool, seed);
                Ok(Self {
                    cycle,
                    seed,
                    budget,
                    base,
                    regions: pools.regions,
                    pool_os,
                    pool_us,
                    pool_audit,
                    source: Source::Weighted { pool, sampler },
                })
            }
        }
    }

    /// Candidate pairs with their origins, for audit files.
    pub fn pool_audit(&self) -> &[CandidatePair] {
        &self.pool_audit
    }

    /// Next pair in the draw stream, `None` once the pool is exhausted.
    pub fn next_query(&mut self) -> Option<QueryRecord> {
        let cycle = self.cycle;
        match &mut self.source {
            Source::Weighted { pool, sampler } => {
                let i = sampler.next_index()?;
                let (c, p) = pool.entries()[i];
                Some(QueryRecord {
                    pair: c.pair,
                    origin: c.origin,
                    probability: p,
                    cycle,
                })
            }
            Source::Uniform { rng, n, drawn } => {
                let total = *n * n.saturating_sub(1) / 2;
                if drawn.len() >= total {
                    return None;
                }
                loop {
                    let u = rng.random_range(0..*n);
                    let v = rng.random_range(0..*n);
                    let Some(pair) = PairKey::new(u, v) else {
                        continue;
                    };
                    if drawn.insert(pair) {
                        return Some(QueryRecord {
                            pair,
                            origin: Origin::Us,
                            probability: 1.0 / total as f64,
                            cycle,
                        });
                    }
                }
            }
        }
    }
}
