use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no policy entry for agent {agent} at history {history}")]
    MissingPolicyEntry { agent: usize, history: String },

    #[error("unsupported policy parameterization: {0}")]
    UnsupportedParameterization(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("node budget of {budget} exceeded at depth {depth}")]
    BudgetExceeded { depth: usize, budget: usize },

    #[error("bellman system has no unique solution: {0}")]
    NoUniqueSolution(String),

    #[error("variant mismatch: expected {expected}, found {found}")]
    VariantMismatch { expected: String, found: String },

    #[error("unreachable draw: {0}")]
    Unreachable(String),

    #[error("value undefined: {0}")]
    Undefined(String),

    #[error("non-finite parameters at iterate {iterate}")]
    NonFinite { iterate: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
