use std::path::PathBuf;

use crate::model::PairKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("contradiction: {0}")]
    Contradiction(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("zero-norm vector at sample {0}")]
    ZeroVector(usize),

    #[error("hierarchy level {level} out of range ({levels} levels)")]
    LevelOutOfRange { level: usize, levels: usize },

    #[error("assignment needs rows <= columns, got {rows}x{cols}")]
    InfeasibleShape { rows: usize, cols: usize },

    #[error("query {0} has no positive in the gallery")]
    NoPositives(usize),

    #[error("metric not applicable: {0}")]
    NotApplicable(&'static str),

    #[error("ground-truth identities are required")]
    MissingIdentities,

    #[error("cycle {cycle} incomplete after {charged} answers: {reason}")]
    CycleIncomplete {
        cycle: usize,
        charged: usize,
        reason: String,
    },

    #[error("unknown query {0}")]
    UnknownQuery(u64),

    #[error("{0} queries are still pending")]
    PendingQueries(usize),

    #[error("all cycles are finished")]
    Finished,

    #[error("no replacement embeddings at {path} after {waited_ms} ms")]
    RefreshTimeout { path: PathBuf, waited_ms: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn contradiction(pair: PairKey, detail: &str) -> Self {
        Error::Contradiction(format!("pair ({}, {}): {detail}", pair.a(), pair.b()))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn is_contradiction(&self) -> bool {
        matches!(self, Error::Contradiction(_))
    }
}
