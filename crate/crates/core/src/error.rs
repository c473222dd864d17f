use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("support sizes differ: {0} vs {1}")]
    SupportMismatch(usize, usize),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    /// The objective of a supremum was still increasing at the edge of the
    /// admissible range.
    #[error("supremum not attained: objective still increasing at t = {at:e}")]
    Unbounded { at: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("degenerate samples: {0}")]
    Degenerate(String),

    #[error("problem size {size} exceeds budget {budget}")]
    Budget { size: usize, budget: usize },

    #[error("non-finite training loss: {0}")]
    NonFinite(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
