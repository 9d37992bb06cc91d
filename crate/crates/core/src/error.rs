use thiserror::Error;

/// Errors raised across the lab. Configuration problems are kept apart from
/// internal consistency failures so the command line can map them to distinct
/// exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("universe index must be >= 1, got {0}")]
    ZeroIndex(u64),

    #[error("malformed string for universe {universe}: {reason}")]
    MalformedString { universe: String, reason: String },

    #[error("index overflow while encoding ({0})")]
    IndexOverflow(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("rate function invalid at n = {n}: R(n) = {value}")]
    InvalidRate { n: u64, value: f64 },

    #[error("construction failed at index {index}: {reason}")]
    ConstructionFailure { index: usize, reason: String },

    #[error("no exact error formula for this language/distribution pair: {0}")]
    NoTailFormula(String),

    #[error("instance analytics inconsistent: {0}")]
    AnalyticsMismatch(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("exact evaluation budget exceeded ({0}); use Monte Carlo instead")]
    BudgetExceeded(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
