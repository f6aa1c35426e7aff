use thiserror::Error;

/// Errors surfaced by the scheduling framework.
#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} outside feature domain [0,1] (feature {feature})")]
    OutOfDomain { feature: usize, value: f64 },

    #[error("discrete feature {feature} has no bin for value {value}")]
    UnknownDiscreteValue { feature: usize, value: f64 },

    #[error("feature index {index} out of range (scheme has {count} features)")]
    BadFeatureIndex { index: usize, count: usize },

    #[error("descriptive action {0:?} is infeasible: no item in its condition")]
    InfeasibleAction(Vec<usize>),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
