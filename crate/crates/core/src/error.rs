use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid range: lo={lo} must be < hi={hi}")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("insufficient sample: need {required}, got {got}")]
    InsufficientSample { required: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("foam construction exhausted its stage budget ({budget} stages)")]
    ConstructionBudget { budget: usize },

    #[error("rounding produced the zero vector (sample too small for the scaling factor)")]
    DegenerateRounding,

    #[error("algorithm failure: {0}")]
    AlgorithmFailure(String),

    #[error("boosting round {round} failed: rejection sampler exhausted its slice")]
    RoundFailure { round: usize },

    #[error("boosting did not terminate within {rounds} rounds")]
    NonTermination { rounds: usize },

    #[error("scaling fit is degenerate: {usable} usable points, need at least 4")]
    FitDegenerate { usable: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
