use thiserror::Error;

use crate::driver::RunRecord;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("policy error: {0}")]
    Policy(String),
    #[error("planner refused: {0}")]
    PlannerRefused(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    /// A run aborted part-way; the rows completed so far are kept.
    #[error("run aborted after {} iterations: {source}", partial.rows.len())]
    Aborted {
        partial: Box<RunRecord>,
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of deterministic invariants (as opposed to bad
    /// input or statistical misses).
    pub fn is_invariant_violation(&self) -> bool {
        match self {
            Error::Invariant(_) => true,
            Error::Aborted { source, .. } => source.is_invariant_violation(),
            _ => false,
        }
    }
}
