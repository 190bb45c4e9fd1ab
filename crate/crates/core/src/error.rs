use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cell budget exceeded: needed more than {budget} cells")]
    CellBudgetExceeded { budget: usize },

    #[error("node budget exceeded: needed more than {budget} nodes")]
    NodeBudgetExceeded { budget: usize },

    #[error("prefix exhausted after {len} digits before the radius inequality was met")]
    PrefixExhausted { len: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("hypothesis not witnessed: {0}")]
    HypothesisNotWitnessed(String),

    #[error("sampling starvation: rejection rate exceeded {rate}")]
    SamplingStarvation { rate: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
