use std::path::PathBuf;

use crate::stats::LmmFit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input data violates a domain invariant (off-grid rating, empty id, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("inconsistent session {user_a}/{user_b}: {reason}")]
    InconsistentSession {
        user_a: String,
        user_b: String,
        reason: String,
    },

    #[error("insufficient negatives: need {needed}, pool has {available}")]
    InsufficientNegatives { needed: usize, available: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("missing item metadata for {0}")]
    MissingItemMeta(String),

    #[error("mixed model did not converge after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        best: Box<LmmFit>,
    },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("tree format error at line {line}: {reason}")]
    TreeFormat { line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
