use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::model::{Constraint, Relation, RunConfig};
use crate::sampler::QueryRecord;
use crate::{Error, Result};

use super::{close_cycle, ALState, Answer, CycleOutput, CyclePlan, Strategy, Tally};

/// How an issued query ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "relation")]
pub enum Resolution {
    /// Answered by the oracle and charged to the budget.
    Charged(Relation),
    /// Skipped by the oracle; not charged.
    Skipped,
    /// Became derivable from other answers while waiting; not charged.
    Derived(Relation),
}

/// Result of [`CycleQueue::answer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerOutcome {
    /// The query was open and is now resolved.
    Resolved(Resolution),
    /// The query had already been resolved compatibly; nothing changed.
    AlreadyResolved(Resolution),
}

#[derive(Debug, Clone, Copy)]
pub struct Ticket {
    pub id: u64,
    pub record: QueryRecord,
}

/// The open queries of one cycle.
///
/// Up to `budget - charged` queries are outstanding at once, taken from the
/// plan's draw stream in order. Whenever an answer arrives, outstanding
/// queries that became derivable are resolved without charge and the queue
/// is topped up. Answering the head each time reproduces a one-at-a-time
/// driver exactly.
pub struct CycleQueue {
    plan: CyclePlan,
    pending: VecDeque<u64>,
    tickets: BTreeMap<u64, (QueryRecord, Option<Resolution>)>,
    next_id: u64,
    tally: Tally,
    asked: Vec<QueryRecord>,
}

impl CycleQueue {
    /// Prepares the cycle for `state.cycle` and fills the queue. Ticket ids
    /// start at `first_id`.
    pub fn open(
        state: &mut ALState,
        config: &RunConfig,
        strategy: Strategy,
        first_id: u64,
    ) -> Result<Self> {
        let plan = CyclePlan::prepare(&state.embeddings, &state.store, config, strategy, state.cycle)?;
        state.budget_allotted += plan.budget;
        let mut q = Self {
            plan,
            pending: VecDeque::new(),
            tickets: BTreeMap::new(),
            next_id: first_id,
            tally: Tally::default(),
            asked: Vec::new(),
        };
        q.fill(state);
        Ok(q)
    }

    pub fn plan(&self) -> &CyclePlan {
        &self.plan
    }

    pub fn cycle(&self) -> usize {
        self.plan.cycle
    }

    pub fn budget(&self) -> usize {
        self.plan.budget
    }

    pub fn charged(&self) -> usize {
        self.tally.charged
    }

    pub fn skipped(&self) -> usize {
        self.tally.skipped
    }

    pub fn resolved_by_closure(&self) -> usize {
        self.tally.closure
    }

    /// Id the next cycle's tickets should start from.
    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn num_pending(&self) -> usize {
        self.pending.len()
    }

    pub fn is_done(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn head(&self) -> Option<Ticket> {
        self.pending.front().map(|&id| self.ticket(id))
    }

    pub fn pending(&self) -> impl Iterator<Item = Ticket> + '_ {
        self.pending.iter().map(|&id| self.ticket(id))
    }

    fn ticket(&self, id: u64) -> Ticket {
        Ticket {
            id,
            record: self.tickets[&id].0,
        }
    }

    fn fill(&mut self, state: &ALState) {
        while self.pending.len() + self.tally.charged < self.plan.budget {
            let Some(q) = self.plan.next_query() else { break };
            if state.store.relation_of(q.pair).is_some() {
                self.tally.closure += 1;
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            self.tickets.insert(id, (q, None));
            self.pending.push_back(id);
        }
    }

    /// Applies an answer to ticket `id`.
    ///
    /// A ticket that was already resolved accepts the same answer again
    /// (nothing is charged twice) and rejects a conflicting one with
    /// [`Error::Contradiction`].
    pub fn answer(&mut self, state: &mut ALState, id: u64, answer: Answer) -> Result<AnswerOutcome> {
        let (record, resolution) = *self.tickets.get(&id).ok_or(Error::UnknownQuery(id))?;
        if let Some(done) = resolution {
            return match (done, answer) {
                (Resolution::Charged(r) | Resolution::Derived(r), Answer::Link(given)) if r != given => {
                    Err(Error::Contradiction(format!(
                        "query {id} is already known to be {}",
                        r.as_str()
                    )))
                }
                _ => Ok(AnswerOutcome::AlreadyResolved(done)),
            };
        }
        let resolution = match answer {
            Answer::Link(relation) => {
                state
                    .store
                    .add(Constraint::oracle(record.pair, relation, self.plan.cycle))?;
                state.budget_used += 1;
                self.tally.record(relation);
                Resolution::Charged(relation)
            }
            Answer::Skip => {
                self.tally.skipped += 1;
                Resolution::Skipped
            }
        };
        self.asked.push(record);
        self.tickets.get_mut(&id).expect("ticket exists").1 = Some(resolution);
        self.pending.retain(|&p| p != id);
        if matches!(resolution, Resolution::Charged(_)) {
            self.resolve_derivable(state);
        }
        self.fill(state);
        Ok(AnswerOutcome::Resolved(resolution))
    }

    fn resolve_derivable(&mut self, state: &ALState) {
        let tickets = &mut self.tickets;
        let tally = &mut self.tally;
        self.pending.retain(|id| {
            let entry = tickets.get_mut(id).expect("ticket exists");
            match state.store.relation_of(entry.0.pair) {
                Some(r) => {
                    entry.1 = Some(Resolution::Derived(r));
                    tally.closure += 1;
                    false
                }
                None => true,
            }
        });
    }

    /// Refines, records history and returns the cycle's artifacts. Fails
    /// while queries are still pending.
    pub fn close(self, state: &mut ALState, config: &RunConfig) -> Result<CycleOutput> {
        if !self.pending.is_empty() {
            return Err(Error::PendingQueries(self.pending.len()));
        }
        log::debug!(
            "cycle {}: {} regions, pools {}+{}, charged {}/{}",
            self.plan.cycle,
            self.plan.regions.len(),
            self.plan.pool_os,
            self.plan.pool_us,
            self.tally.charged,
            self.plan.budget
        );
        close_cycle(state, config, &self.plan, self.tally, self.asked.len())?;
        Ok(CycleOutput {
            queries: self.asked,
            pool: self.plan.pool_audit().to_vec(),
        })
    }
}
