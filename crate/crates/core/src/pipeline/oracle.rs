use crate::model::{Constraint, EmbeddingSet, PairKey, Relation};
use crate::{Error, Result};

/// What an annotator said about a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    Link(Relation),
    /// Unsure; produces no constraint and costs no budget.
    Skip,
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("oracle timed out")]
    Timeout,
    #[error("oracle failed: {0}")]
    Failed(String),
}

/// Source of pair answers (a simulation, a script, a human behind a queue).
pub trait Oracle {
    fn answer(&mut self, pair: PairKey) -> std::result::Result<Answer, OracleError>;
}

/// Answers from ground-truth identities.
#[derive(Debug, Clone)]
pub struct SimulatedOracle {
    identities: Vec<String>,
}

impl SimulatedOracle {
    pub fn new(e: &EmbeddingSet) -> Result<Self> {
        Ok(Self {
            identities: e.identities().ok_or(Error::MissingIdentities)?.to_vec(),
        })
    }

    pub fn relation(&self, pair: PairKey) -> Relation {
        if self.identities[pair.a()] == self.identities[pair.b()] {
            Relation::MustLink
        } else {
            Relation::CannotLink
        }
    }
}

impl Oracle for SimulatedOracle {
    fn answer(&mut self, pair: PairKey) -> std::result::Result<Answer, OracleError> {
        Ok(Answer::Link(self.relation(pair)))
    }
}

/// One simulated answer as a stamped constraint.
pub fn simulated_oracle(e: &EmbeddingSet, pair: PairKey, cycle: usize) -> Result<Constraint> {
    let ids = e.identities().ok_or(Error::MissingIdentities)?;
    let relation = if ids[pair.a()] == ids[pair.b()] {
        Relation::MustLink
    } else {
        Relation::CannotLink
    };
    Ok(Constraint::oracle(pair, relation, cycle))
}
