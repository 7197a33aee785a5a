use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("need at least {required} points, got {got}")]
    TooFewPoints { required: usize, got: usize },

    #[error("{value} lies outside the domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("bound violation: {0}")]
    BoundViolation(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("solver diverged at time step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    #[error(
        "refinement did not reach tolerance {epsilon} by level {level} (last error {last_error})"
    )]
    NotConverged {
        epsilon: f64,
        level: u32,
        last_error: f64,
    },

    #[error("damping too large: objective increased for {0} consecutive iterations")]
    DampingTooLarge(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
