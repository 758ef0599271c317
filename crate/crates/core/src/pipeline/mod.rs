//! The active-learning loop: cluster, sample, ask, refine, refresh.

mod oracle;
mod plan;
mod queue;
mod refresh;
mod rundir;
mod synthetic;

pub use oracle::{simulated_oracle, Answer, Oracle, OracleError, SimulatedOracle};
pub use plan::{cycle_seed, CyclePlan, Strategy, Views};
pub use queue::{AnswerOutcome, CycleQueue, Resolution, Ticket};
pub use refresh::RefreshHook;
pub use rundir::RunDir;
pub use synthetic::{generate_synthetic, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::ambiguity::CandidatePair;
use crate::evaluation::adjusted_rand_index;
use crate::geometry::FeatureDistance;
use crate::model::{Constraint, ConstraintStore, EmbeddingSet, Partition, Relation, RunConfig};
use crate::sampler::QueryRecord;
use crate::{np3, Error, Result};

/// What one cycle did, as stored in `history.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub regions: usize,
    pub pool_os: usize,
    pub pool_us: usize,
    pub budget: usize,
    /// Queries shown to the oracle, skips included.
    pub issued: usize,
    pub charged: usize,
    pub skipped: usize,
    /// Draws whose answer already followed from earlier constraints.
    pub resolved_by_closure: usize,
    pub must_links_added: usize,
    pub cannot_links_added: usize,
    pub clusters: usize,
    pub ari_base: Option<f64>,
    pub ari_refined: Option<f64>,
    pub budget_used_total: usize,
    /// Cumulative charged queries over `n(n-1)/2`.
    pub used_fraction: f64,
}

/// Per-cycle artifacts beyond the history record.
#[derive(Debug, Clone)]
pub struct CycleOutput {
    pub queries: Vec<QueryRecord>,
    pub pool: Vec<CandidatePair>,
}

#[derive(Debug, Clone)]
pub struct ALState {
    pub cycle: usize,
    pub embeddings: EmbeddingSet,
    pub store: ConstraintStore,
    pub current_partition: Partition,
    pub budget_allotted: usize,
    pub budget_used: usize,
    pub history: Vec<CycleRecord>,
}

impl ALState {
    /// Fresh state whose partition is the unconstrained base view.
    pub fn new(embeddings: EmbeddingSet, config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let views = Views::compute(&embeddings, config)?;
        let n = embeddings.len();
        Ok(Self {
            cycle: 0,
            current_partition: views.base(config.base_view).clone(),
            embeddings,
            store: ConstraintStore::new(n),
            budget_allotted: 0,
            budget_used: 0,
            history: Vec::new(),
        })
    }

    /// Seeds the store with prior constraints (marked as seed, not charged).
    pub fn with_constraints(mut self, constraints: &[Constraint]) -> Result<Self> {
        for c in constraints {
            self.store.add(*c)?;
        }
        Ok(self)
    }

    pub fn total_pairs(&self) -> usize {
        let n = self.embeddings.len();
        n * n.saturating_sub(1) / 2
    }
}

/// Counters accumulated while a cycle's queries are answered.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Tally {
    pub charged: usize,
    pub skipped: usize,
    pub closure: usize,
    pub ml: usize,
    pub cl: usize,
}

impl Tally {
    pub fn record(&mut self, relation: Relation) {
        self.charged += 1;
        match relation {
            Relation::MustLink => self.ml += 1,
            Relation::CannotLink => self.cl += 1,
        }
    }
}

/// Refines the plan's base view against the store, updates the state and
/// appends the history record.
pub(crate) fn close_cycle(
    state: &mut ALState,
    config: &RunConfig,
    plan: &CyclePlan,
    tally: Tally,
    issued: usize,
) -> Result<()> {
    let dist = FeatureDistance::cosine(&state.embeddings)?;
    let refined = np3::refine(&plan.base, &state.store, &dist, config.linkage)?;
    let (ari_base, ari_refined) = match state.embeddings.identities() {
        Some(truth) => (
            Some(adjusted_rand_index(plan.base.labels(), truth)?),
            Some(adjusted_rand_index(refined.labels(), truth)?),
        ),
        None => (None, None),
    };
    let total = state.total_pairs();
    state.history.push(CycleRecord {
        cycle: plan.cycle,
        regions: plan.regions.len(),
        pool_os: plan.pool_os,
        pool_us: plan.pool_us,
        budget: plan.budget,
        issued,
        charged: tally.charged,
        skipped: tally.skipped,
        resolved_by_closure: tally.closure,
        must_links_added: tally.ml,
        cannot_links_added: tally.cl,
        clusters: refined.num_clusters(),
        ari_base,
        ari_refined,
        budget_used_total: state.budget_used,
        used_fraction: if total == 0 {
            0.0
        } else {
            state.budget_used as f64 / total as f64
        },
    });
    state.current_partition = refined;
    state.cycle = plan.cycle + 1;
    Ok(())
}

/// One cycle against a blocking oracle.
///
/// Draws continue until the budget is charged or the pool runs out. A draw
/// whose relation is already implied by the store is resolved without asking
/// and costs nothing; so does an oracle skip. If the oracle fails mid-batch,
/// the constraints gathered so far stay in the store and the cycle is
/// reported as incomplete.
pub fn run_cycle(
    state: &mut ALState,
    config: &RunConfig,
    strategy: Strategy,
    oracle: &mut dyn Oracle,
) -> Result<CycleOutput> {
    let mut queue = CycleQueue::open(state, config, strategy, 0)?;
    while let Some(t) = queue.head() {
        match oracle.answer(t.record.pair) {
            Ok(answer) => {
                queue.answer(state, t.id, answer)?;
            }
            Err(e) => {
                return Err(Error::CycleIncomplete {
                    cycle: queue.cycle(),
                    charged: queue.charged(),
                    reason: e.to_string(),
                })
            }
        }
    }
    queue.close(state, config)
}

/// Final state of a loop.
#[derive(Debug, Clone)]
pub struct LoopResult {
    pub state: ALState,
    pub partition: Partition,
}

/// Runs `config.num_cycles` cycles, refreshing embeddings in between.
/// With a run directory, every artifact is written as it is produced.
pub fn run_loop(
    embeddings: EmbeddingSet,
    config: &RunConfig,
    strategy: Strategy,
    oracle: &mut dyn Oracle,
    refresh: &RefreshHook,
    run_dir: Option<&RunDir>,
) -> Result<LoopResult> {
    if config.num_cycles == 0 {
        return Err(Error::Invalid("num_cycles must be at least 1".into()));
    }
    let mut state = ALState::new(embeddings, config)?;
    if let Some(dir) = run_dir {
        dir.init(config)?;
    }
    for c in 0..config.num_cycles {
        let out = run_cycle(&mut state, config, strategy, oracle);
        if let Some(dir) = run_dir {
            // Partial constraints are kept on disk even when the cycle fails.
            dir.write_constraints(&state)?;
        }
        let out = out?;
        if let Some(dir) = run_dir {
            dir.write_cycle(&state, &out)?;
        }
        if c + 1 < config.num_cycles {
            state.embeddings = refresh.apply(&state, c)?;
        }
    }
    if let Some(dir) = run_dir {
        dir.finish(&state)?;
    }
    let partition = state.current_partition.clone();
    Ok(LoopResult { state, partition })
}
