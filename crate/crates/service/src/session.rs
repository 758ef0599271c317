use aas_core::pipeline::{
    ALState, Answer, AnswerOutcome, CycleQueue, CycleRecord, RefreshHook, Resolution, RunDir,
    Strategy,
};
use aas_core::{EmbeddingSet, Error, Relation, Result, RunConfig};
use serde::{Deserialize, Serialize};

/// An annotator's verdict on a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Ml,
    Cl,
    Skip,
}

impl From<Label> for Answer {
    fn from(l: Label) -> Self {
        match l {
            Label::Ml => Answer::Link(Relation::MustLink),
            Label::Cl => Answer::Link(Relation::CannotLink),
            Label::Skip => Answer::Skip,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleRef {
    pub id: String,
    pub image_uri: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NextPair {
    pub query_id: u64,
    pub cycle: usize,
    pub a: SampleRef,
    pub b: SampleRef,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionInfo {
    pub samples: usize,
    pub cycle: usize,
    pub num_cycles: usize,
    pub finished: bool,
    pub cycle_budget: usize,
    pub regions: usize,
    pub pool_os: usize,
    pub pool_us: usize,
    pub budget_allotted: usize,
    pub budget_used: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Progress {
    pub cycle: usize,
    pub num_cycles: usize,
    pub finished: bool,
    pub cycle_budget: usize,
    pub charged: usize,
    pub skipped: usize,
    pub resolved_by_closure: usize,
    pub pending: usize,
    pub budget_allotted: usize,
    pub budget_used: usize,
    pub used_fraction: f64,
    pub history: Vec<CycleRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnswerReceipt {
    pub query_id: u64,
    pub resolution: Resolution,
    pub already_resolved: bool,
    pub progress: Progress,
}

enum Phase {
    Open(Box<CycleQueue>),
    /// The last cycle closed but the next one could not start yet (a
    /// refresh failed); `advance` retries.
    AwaitingRefresh { next_id: u64, refreshed: bool },
    Finished,
}

/// One annotation run backed by a run directory. Not thread-safe by itself;
/// the HTTP layer serializes access.
pub struct Session {
    config: RunConfig,
    strategy: Strategy,
    refresh: RefreshHook,
    run_dir: RunDir,
    state: ALState,
    phase: Phase,
}

impl Session {
    pub fn start(
        embeddings: EmbeddingSet,
        config: RunConfig,
        strategy: Strategy,
        refresh: RefreshHook,
        run_dir: RunDir,
    ) -> Result<Self> {
        if config.num_cycles == 0 {
            return Err(Error::Invalid("num_cycles must be at least 1".into()));
        }
        let mut state = ALState::new(embeddings, &config)?;
        run_dir.init(&config)?;
        let queue = CycleQueue::open(&mut state, &config, strategy, 0)?;
        Ok(Self {
            config,
            strategy,
            refresh,
            run_dir,
            state,
            phase: Phase::Open(Box::new(queue)),
        })
    }

    pub fn state(&self) -> &ALState {
        &self.state
    }

    pub fn run_dir(&self) -> &RunDir {
        &self.run_dir
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.phase, Phase::Finished)
    }

    fn queue(&self) -> Option<&CycleQueue> {
        match &self.phase {
            Phase::Open(q) => Some(q),
            _ => None,
        }
    }

    pub fn info(&self) -> SessionInfo {
        let q = self.queue();
        SessionInfo {
            samples: self.state.embeddings.len(),
            cycle: self.state.cycle,
            num_cycles: self.config.num_cycles,
            finished: self.is_finished(),
            cycle_budget: q.map_or(0, |q| q.budget()),
            regions: q.map_or(0, |q| q.plan().regions.len()),
            pool_os: q.map_or(0, |q| q.plan().pool_os),
            pool_us: q.map_or(0, |q| q.plan().pool_us),
            budget_allotted: self.state.budget_allotted,
            budget_used: self.state.budget_used,
        }
    }

    pub fn progress(&self) -> Progress {
        let q = self.queue();
        let pairs = self.state.total_pairs();
        Progress {
            cycle: self.state.cycle,
            num_cycles: self.config.num_cycles,
            finished: self.is_finished(),
            cycle_budget: q.map_or(0, |q| q.budget()),
            charged: q.map_or(0, |q| q.charged()),
            skipped: q.map_or(0, |q| q.skipped()),
            resolved_by_closure: q.map_or(0, |q| q.resolved_by_closure()),
            pending: q.map_or(0, |q| q.num_pending()),
            budget_allotted: self.state.budget_allotted,
            budget_used: self.state.budget_used,
            used_fraction: if pairs == 0 {
                0.0
            } else {
                self.state.budget_used as f64 / pairs as f64
            },
            history: self.state.history.clone(),
        }
    }

    /// The oldest open query. Asking again returns the same one until it is
    /// answered.
    pub fn next_pair(&self) -> Option<NextPair> {
        let t = self.queue()?.head()?;
        let e = &self.state.embeddings;
        let sample = |i: usize| SampleRef {
            id: e.id(i).to_string(),
            image_uri: e.image_uri(i).map(str::to_string),
        };
        Some(NextPair {
            query_id: t.id,
            cycle: t.record.cycle,
            a: sample(t.record.pair.a()),
            b: sample(t.record.pair.b()),
            probability: t.record.probability,
        })
    }

    pub fn answer(&mut self, query_id: u64, label: Label) -> Result<AnswerReceipt> {
        let Phase::Open(queue) = &mut self.phase else {
            return Err(Error::UnknownQuery(query_id));
        };
        let outcome = queue.answer(&mut self.state, query_id, label.into())?;
        let (resolution, already_resolved) = match outcome {
            AnswerOutcome::Resolved(r) => (r, false),
            AnswerOutcome::AlreadyResolved(r) => (r, true),
        };
        if matches!(resolution, Resolution::Charged(_)) && !already_resolved {
            self.run_dir.write_constraints(&self.state)?;
        }
        Ok(AnswerReceipt {
            query_id,
            resolution,
            already_resolved,
            progress: self.progress(),
        })
    }

    /// Closes the current cycle (refine, write artifacts), refreshes the
    /// embeddings and opens the next one.
    pub fn advance(&mut self) -> Result<Progress> {
        match std::mem::replace(&mut self.phase, Phase::Finished) {
            Phase::Finished => return Err(Error::Finished),
            waiting @ Phase::AwaitingRefresh { .. } => self.phase = waiting,
            Phase::Open(queue) => {
                if !queue.is_done() {
                    let pending = queue.num_pending();
                    self.phase = Phase::Open(queue);
                    return Err(Error::PendingQueries(pending));
                }
                let next_id = queue.next_id();
                let out = (*queue).close(&mut self.state, &self.config)?;
                self.run_dir.write_constraints(&self.state)?;
                self.run_dir.write_cycle(&self.state, &out)?;
                if self.state.cycle >= self.config.num_cycles {
                    self.run_dir.finish(&self.state)?;
                    return Ok(self.progress());
                }
                self.phase = Phase::AwaitingRefresh {
                    next_id,
                    refreshed: false,
                };
            }
        }
        self.open_next()?;
        Ok(self.progress())
    }

    fn open_next(&mut self) -> Result<()> {
        let Phase::AwaitingRefresh { next_id, refreshed } = self.phase else {
            return Ok(());
        };
        if !refreshed {
            self.state.embeddings = self.refresh.apply(&self.state, self.state.cycle - 1)?;
            self.phase = Phase::AwaitingRefresh {
                next_id,
                refreshed: true,
            };
        }
        let queue = CycleQueue::open(&mut self.state, &self.config, self.strategy, next_id)?;
        self.phase = Phase::Open(Box::new(queue));
        Ok(())
    }
}
