//! The marginal distribution over candidate pairs and batch drawing.
//!
//! `P(Y) = ε·P(Y | U_os) + (1 − ε)·P(Y | U_us)`. Over-segmentation pairs are
//! weighted by similarity. Under-segmentation pairs factor into a pair-type
//! prior, a region term and a within-region term; each factor can be made
//! uniform through [`UsWeighting`].

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ambiguity::{CandidatePair, Origin, PairType, RegionRef};
use crate::model::{EmbeddingSet, PairKey, PairMass, RegionMass, RunConfig};
use crate::{Error, Result};

/// Normalized similarity weights. The flag is set when every similarity was
/// zero and the result fell back to uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    pub probs: Vec<f64>,
    pub degenerate: bool,
}

fn normalize_or_uniform(weights: &[f64]) -> Conditional {
    let clipped: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total > 0.0 {
        Conditional {
            probs: clipped.iter().map(|w| w / total).collect(),
            degenerate: false,
        }
    } else {
        let u = 1.0 / weights.len().max(1) as f64;
        Conditional {
            probs: vec![u; weights.len()],
            degenerate: true,
        }
    }
}

/// `P(Y | Y ∈ U_os) = sim(Y) / Σ sim`. Negative similarities (cosine mode)
/// count as zero.
pub fn os_conditional(pool: &[CandidatePair]) -> Conditional {
    let sims: Vec<f64> = pool.iter().map(|c| c.similarity).collect();
    normalize_or_uniform(&sims)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UsWeighting {
    /// Prior over inlier-inlier, inlier-outlier, outlier-outlier pairs.
    pub type_prior: [f64; 3],
    pub region_mass: RegionMass,
    pub pair_mass: PairMass,
}

impl Default for UsWeighting {
    fn default() -> Self {
        Self {
            type_prior: [1.0; 3],
            region_mass: RegionMass::PairCount,
            pair_mass: PairMass::Similarity,
        }
    }
}

impl From<&RunConfig> for UsWeighting {
    fn from(c: &RunConfig) -> Self {
        Self {
            type_prior: c.type_prior,
            region_mass: c.region_mass,
            pair_mass: c.pair_mass,
        }
    }
}

/// `P(Y | Y ∈ U_us) = π_i · ρ_{k|i} · ω_{y|ik}` for a pair of type `i` in
/// region `k`.
///
/// - `π_i`: the type prior renormalized over types present in the pool
/// - `ρ_{k|i}`: region `k`'s share of type-`i` pairs (or uniform over regions)
/// - `ω_{y|ik}`: similarity share inside the (type, region) cell (or uniform)
pub fn us_conditional(pool: &[CandidatePair], w: &UsWeighting) -> Result<Vec<f64>> {
    if pool.is_empty() {
        return Err(Error::Invalid("under-segmentation pool is empty".into()));
    }
    let mut type_count = [0usize; 3];
    let mut cell_count: HashMap<(usize, RegionRef), usize> = HashMap::new();
    let mut cell_sim: HashMap<(usize, RegionRef), f64> = HashMap::new();
    let mut regions_of_type: [BTreeMap<RegionRef, ()>; 3] = Default::default();
    for c in pool {
        let t = c.pair_type.index();
        type_count[t] += 1;
        *cell_count.entry((t, c.region)).or_default() += 1;
        *cell_sim.entry((t, c.region)).or_default() += c.similarity.max(0.0);
        regions_of_type[t].insert(c.region, ());
    }
    let present: Vec<usize> = (0..3).filter(|&t| type_count[t] > 0).collect();
    let prior_mass: f64 = present.iter().map(|&t| w.type_prior[t]).sum();
    let pi = |t: usize| {
        if prior_mass > 0.0 {
            w.type_prior[t] / prior_mass
        } else {
            1.0 / present.len() as f64
        }
    };
    Ok(pool
        .iter()
        .map(|c| {
            let t = c.pair_type.index();
            let cell = (t, c.region);
            let rho = match w.region_mass {
                RegionMass::PairCount => cell_count[&cell] as f64 / type_count[t] as f64,
                RegionMass::Uniform => 1.0 / regions_of_type[t].len() as f64,
            };
            let omega = match w.pair_mass {
                PairMass::Similarity if cell_sim[&cell] > 0.0 => {
                    c.similarity.max(0.0) / cell_sim[&cell]
                }
                _ => 1.0 / cell_count[&cell] as f64,
            };
            pi(t) * rho * omega
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct TotalsKey {
    pub origin: Origin,
    pub pair_type: PairType,
    pub region: RegionRef,
}

/// Candidate pairs with their marginal probabilities. Over-segmentation
/// entries come first, then under-segmentation entries, each in pool order.
#[derive(Debug, Clone)]
pub struct WeightedPairPool {
    entries: Vec<(CandidatePair, f64)>,
    epsilon_effective: f64,
    os_degenerate: bool,
    totals: BTreeMap<TotalsKey, usize>,
}

impl WeightedPairPool {
    pub fn entries(&self) -> &[(CandidatePair, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// The empty-distribution flag.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn epsilon_effective(&self) -> f64 {
        self.epsilon_effective
    }

    /// Every over-segmentation similarity was zero; that pool fell back to uniform.
    pub fn os_degenerate(&self) -> bool {
        self.os_degenerate
    }

    pub fn totals(&self) -> &BTreeMap<TotalsKey, usize> {
        &self.totals
    }

    pub fn count(&self, origin: Origin) -> usize {
        self.entries.iter().filter(|(c, _)| c.origin == origin).count()
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|&(_, p)| p)
    }
}

/// Mixes both conditionals with prior `epsilon`. If exactly one pool is
/// empty, all mass moves to the other and `epsilon_effective` records that.
pub fn marginal(
    os: Vec<CandidatePair>,
    us: Vec<CandidatePair>,
    epsilon: f64,
    weighting: &UsWeighting,
) -> Result<WeightedPairPool> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Invalid(format!("epsilon must be in [0, 1], got {epsilon}")));
    }
    let epsilon_effective = match (os.is_empty(), us.is_empty()) {
        (true, false) => 0.0,
        (false, true) => 1.0,
        _ => epsilon,
    };
    let os_cond = os_conditional(&os);
    let os_degenerate = os_cond.degenerate && !os.is_empty();
    let us_probs = if us.is_empty() {
        Vec::new()
    } else {
        us_conditional(&us, weighting)?
    };
    let mut totals = BTreeMap::new();
    let mut entries = Vec::with_capacity(os.len() + us.len());
    for (c, p) in os.into_iter().zip(os_cond.probs) {
        entries.push((c, epsilon_effective * p));
    }
    for (c, p) in us.into_iter().zip(us_probs) {
        entries.push((c, (1.0 - epsilon_effective) * p));
    }
    for (c, _) in &entries {
        let key = TotalsKey {
            origin: c.origin,
            pair_type: c.pair_type,
            region: c.region,
        };
        *totals.entry(key).or_default() += 1;
    }
    Ok(WeightedPairPool {
        entries,
        epsilon_effective,
        os_degenerate,
        totals,
    })
}

/// Draws entries without replacement, proportionally to their remaining
/// probability mass (renormalized after every draw). The order depends only
/// on the pool and the seed. Zero-probability entries are never drawn.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    weights: Vec<f64>,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(pool: &WeightedPairPool, seed: u64) -> Self {
        Self {
            weights: pool.probabilities().collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Index of the next drawn entry.
    pub fn next_index(&mut self) -> Option<usize> {
        let total: f64 = self.weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let target = self.rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last_positive = None;
        for (i, &w) in self.weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last_positive = Some(i);
            if target < acc {
                self.weights[i] = 0.0;
                return Some(i);
            }
        }
        // Rounding left `target` past the final boundary.
        let i = last_positive?;
        self.weights[i] = 0.0;
        Some(i)
    }
}

/// Up to `budget` distinct pairs in draw order.
pub fn draw_batch(pool: &WeightedPairPool, budget: usize, seed: u64) -> Vec<PairKey> {
    let mut s = BatchSampler::new(pool, seed);
    std::iter::from_fn(|| s.next_index())
        .take(budget)
        .map(|i| pool.entries[i].0.pair)
        .collect()
}

/// `floor(fraction · n(n−1)/2)`.
pub fn pair_budget(n: usize, fraction: f64) -> usize {
    let pairs = (n as f64) * (n.saturating_sub(1) as f64) / 2.0;
    // The nudge keeps exact products like 0.5 · 4 from flooring to 1.
    (fraction * pairs + 1e-9).floor().max(0.0) as usize
}

#[derive(Debug, Serialize)]
struct QueryLine<'a> {
    a: &'a str,
    b: &'a str,
    origin: Origin,
    probability: f64,
    cycle: usize,
}

/// A drawn query as it appears in the query file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryRecord {
    pub pair: PairKey,
    pub origin: Origin,
    pub probability: f64,
    pub cycle: usize,
}

/// Query file as JSON Lines: `{"a","b","origin","probability","cycle"}`.
pub fn encode_queries(queries: &[QueryRecord], e: &EmbeddingSet) -> Vec<u8> {
    let lines: Vec<QueryLine> = queries
        .iter()
        .map(|q| QueryLine {
            a: e.id(q.pair.a()),
            b: e.id(q.pair.b()),
            origin: q.origin,
            probability: q.probability,
            cycle: q.cycle,
        })
        .collect();
    crate::io::encode_jsonl(&lines)
}
