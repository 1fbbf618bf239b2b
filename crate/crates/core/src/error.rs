use thiserror::Error;

/// Errors raised across model construction, the Gibbs engines, the closed-form
/// evaluators and the verification harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration needs {needed} spins but the cap is {cap}")]
    CapExceeded { needed: usize, cap: usize },

    #[error("non-finite coupling {value} on bond {index}")]
    NonFiniteCoupling { index: usize, value: f64 },

    #[error("outside the region where the bound is stated: {0}")]
    OutsideValidity(String),

    #[error("invalid Monte Carlo configuration: {0}")]
    InvalidMcConfig(String),

    #[error("{0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
