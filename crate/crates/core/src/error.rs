use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("overflow evaluating {0}")]
    Overflow(&'static str),

    #[error("M4 has no solution for x = {x}: g attains only [{low}, {high}] on (eps_inf, eps0)")]
    NoSolution { x: f64, low: f64, high: f64 },

    #[error("insufficient data: {needed} points required, {available} available")]
    InsufficientData { needed: usize, available: usize },

    #[error("non-finite loss at the starting point")]
    NonFiniteLoss,

    #[error("no candidate could be fitted: {0}")]
    AllCandidatesFailed(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
