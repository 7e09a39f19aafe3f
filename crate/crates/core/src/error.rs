use thiserror::Error;

/// Failures of the basis factorization.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("basis matrix is singular (pivot magnitude {pivot:.3e} below {threshold:.3e})")]
    SingularBasis { pivot: f64, threshold: f64 },
    #[error("column replacement at position {position} is degenerate (1 + p_k = {pivot:.3e})")]
    UpdateDegenerate { position: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("basis of order {0} is too large for a dense factorization and has no triangular anchor")]
    TooLarge(usize),
}

#[derive(Debug, Error)]
pub enum PsmError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("an equality program needs an explicit initial basis")]
    MissingBasis,
    #[error("initial dictionary is not optimal for any large lambda ({0})")]
    InfeasibleAtLargeLambda(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("lambda {lambda} outside segment [{lo}, {hi}]")]
    LambdaOutOfRange { lambda: f64, lo: f64, hi: f64 },
    #[error("complementarity violated for split pair {index}: {plus} * {minus}")]
    ComplementarityViolation { index: usize, plus: f64, minus: f64 },
    #[error("oracle size guard: {0}")]
    SizeGuard(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = PsmError> = std::result::Result<T, E>;
