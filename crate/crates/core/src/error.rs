use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty set")]
    EmptySet,

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("base point lies on the set (distance {distance:e}); radius bound undefined")]
    DegenerateDistance { distance: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("certificate not admissible (margin {margin:e})")]
    NotAdmissible { margin: f64 },

    #[error("energy constraint violated: q = {q} >= {limit}")]
    EnergyConstraint { q: f64, limit: f64 },

    #[error("argument {xi} outside the admissible range [0, {limit}]")]
    OutOfDomain { xi: f64, limit: f64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed report: {0}")]
    Report(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
