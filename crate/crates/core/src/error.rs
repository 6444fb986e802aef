use thiserror::Error;

/// Errors produced by the estimation toolkit.
#[derive(Debug, Error)]
pub enum MongeError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("{what} too small: need at least {min}, got {got}")]
    TooSmall {
        what: &'static str,
        min: usize,
        got: usize,
    },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("constraint budget exceeded: {constraints} constraints (max {max})")]
    ConstraintBudget { constraints: usize, max: usize },

    #[error("input is not double-centered (largest row/column sum {0:e})")]
    NotCentered(f64),

    #[error("projection failed to converge after {sweeps} sweeps (gap {gap:e}, drift {drift:e})")]
    ProjectionNotConverged { sweeps: usize, gap: f64, drift: f64 },

    #[error("{failed} of {total} replicates had a non-converged projection")]
    ExperimentFailed { failed: usize, total: usize },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = MongeError> = std::result::Result<T, E>;
