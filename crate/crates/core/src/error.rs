use thiserror::Error;

/// Errors shared by every module of the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite: leading principal minor of order {order} is {value:e}")]
    NotPositiveDefinite { order: usize, value: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("point {point:?} is outside the evaluable domain")]
    OutOfDomain { point: Vec<f64> },
    #[error("dimension {n} too small, need at least {min}")]
    DimensionTooSmall { n: usize, min: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("harmonic gauge violated: max |g^ij Gamma^k_ij| = {residual:e} exceeds {tol:e}")]
    GaugeViolation { residual: f64, tol: f64 },
    #[error("line search failed after {0} step halvings")]
    LineSearchFailed(usize),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
