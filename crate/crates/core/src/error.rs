use thiserror::Error;

/// Errors produced by spec construction, spectral routines and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not irreducible")]
    NotIrreducible,
    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("not an eigenpair: max relative row deviation {0:e}")]
    NotAnEigenpair(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("index out of range")]
    IndexOutOfRange,
    #[error("degenerate normalization")]
    DegenerateNormalization,
    #[error("unreachable state {state} at step {step}")]
    UnreachableState { step: usize, state: usize },
    #[error("shape mismatch")]
    ShapeMismatch,
    #[error("problem too large: {size} states exceeds limit {limit}")]
    TooLarge { size: u128, limit: u128 },
    #[error("boundary vectors not summable: alpha + beta must exceed 1")]
    TailNotSummable,
    #[error("truncation not converged: relative change {0:e} above 1e-10")]
    TruncationNotConverged(f64),
    #[error("degenerate parameters: {0}")]
    DegenerateParams(&'static str),
    #[error("empty sector: no configuration satisfies the occupancy constraint")]
    EmptySector,
    #[error("invalid counts: need 0 < n2 and n1 + n2 <= N")]
    InvalidCounts,
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
