use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::ambiguity::encode_pool_audit;
use crate::io::{write_atomic, write_constraints, write_json, write_partition};
use crate::model::{Relation, RunConfig};
use crate::sampler::encode_queries;
use crate::{Error, Result};

use super::{ALState, CycleOutput};

/// Output directory of a loop run.
///
/// ```text
/// config.json
/// constraints.jsonl
/// cycle_00/{queries.jsonl, pool.jsonl, partition.csv}
/// ...
/// history.json
/// metrics.json
/// ```
///
/// Nothing written here depends on the clock, so equal inputs give
/// byte-identical directories.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

#[derive(Debug, Serialize)]
struct FinalMetrics {
    samples: usize,
    cycles: usize,
    clusters: usize,
    must_links: usize,
    cannot_links: usize,
    budget_allotted: usize,
    budget_used: usize,
    used_fraction: f64,
    ari: Option<f64>,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cycle_dir(&self, cycle: usize) -> PathBuf {
        self.root.join(format!("cycle_{cycle:02}"))
    }

    pub fn constraints_path(&self) -> PathBuf {
        self.root.join("constraints.jsonl")
    }

    pub fn init(&self, config: &RunConfig) -> Result<()> {
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        write_json(&self.root.join("config.json"), config)
    }

    pub fn write_constraints(&self, state: &ALState) -> Result<()> {
        write_constraints(
            &self.constraints_path(),
            state.store.constraints(),
            &state.embeddings,
        )
    }

    /// Queries, pool audit and refined partition of the cycle just closed,
    /// plus the history so far.
    pub fn write_cycle(&self, state: &ALState, out: &CycleOutput) -> Result<()> {
        let cycle = state.cycle.saturating_sub(1);
        let dir = self.cycle_dir(cycle);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let e = &state.embeddings;
        write_atomic(&dir.join("queries.jsonl"), &encode_queries(&out.queries, e))?;
        write_atomic(&dir.join("pool.jsonl"), &encode_pool_audit(&out.pool, e))?;
        write_partition(&dir.join("partition.csv"), &state.current_partition, e)?;
        write_json(&self.root.join("history.json"), &state.history)
    }

    pub fn finish(&self, state: &ALState) -> Result<()> {
        let count = |r: Relation| {
            state
                .store
                .constraints()
                .iter()
                .filter(|c| c.relation == r)
                .count()
        };
        let total = state.total_pairs();
        let metrics = FinalMetrics {
            samples: state.embeddings.len(),
            cycles: state.history.len(),
            clusters: state.current_partition.num_clusters(),
            must_links: count(Relation::MustLink),
            cannot_links: count(Relation::CannotLink),
            budget_allotted: state.budget_allotted,
            budget_used: state.budget_used,
            used_fraction: if total == 0 {
                0.0
            } else {
                state.budget_used as f64 / total as f64
            },
            ari: state.history.last().and_then(|h| h.ari_refined),
        };
        write_json(&self.root.join("history.json"), &state.history)?;
        write_json(&self.root.join("metrics.json"), &metrics)
    }
}
