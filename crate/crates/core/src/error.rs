//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PceError {
    #[error("degree {degree} exceeds the supported maximum {cap}")]
    DegreeOverflow { degree: u32, cap: u32 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),

    #[error("design matrix is rank deficient (numerical rank {rank})")]
    RankDeficient { rank: usize },

    #[error("leverage saturated at observation {index}: the model interpolates this point")]
    SaturatedLeverage { index: usize },

    #[error("output variance is zero; normalized errors are undefined")]
    DegenerateOutput,

    #[error("value {value} lies outside the support of marginal {index}")]
    OutOfSupport { index: usize, value: f64 },

    #[error("heredity parent must have rank 1, got rank {rank}")]
    InvalidParent { rank: usize },

    #[error("non-finite correlation for candidate column {index}")]
    NonFiniteCorrelation { index: usize },
}

pub type Result<T> = std::result::Result<T, PceError>;
