use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("a measure needs at least 2 outcomes, got {0}")]
    TooFewOutcomes(usize),
    #[error("weight {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weight {index} is not finite")]
    NonFinite { index: usize },
    #[error("weights sum to {0}, expected 1 within 1e-9")]
    NotNormalized(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("credal set must not be empty")]
    EmptyCredalSet,
    #[error("target path must have at least one waypoint")]
    EmptyPath,
    #[error("invalid tolerance schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("outcome {outcome} out of range for k = {k}")]
    OutcomeOutOfRange { outcome: usize, k: usize },
    #[error("no data: {0}")]
    Empty(String),
    #[error("selection rule selected no index up to n = {0}")]
    NothingSelected(u64),
    #[error("scan budget of {0} indices exhausted without a qualifying index")]
    BudgetExhausted(u64),
    #[error("selection rule has positive density: {0}")]
    PositiveDensity(String),
    #[error("could not parse selection rule `{0}`")]
    RuleSyntax(String),
    #[error("snapshot error: {0}")]
    Snapshot(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
