//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NonHermitian { residual: f64 },

    #[error("matrix is not unitary (residual {residual:.3e})")]
    NonUnitary { residual: f64 },

    #[error("Schatten order must satisfy p >= 1, got {0}")]
    SchattenOrder(f64),

    #[error("operator is not completely positive (min eigenvalue {min_eigenvalue:.3e})")]
    NotCompletelyPositive { min_eigenvalue: f64 },

    #[error("Kraus set is not trace preserving (residual {residual:.3e})")]
    NotTracePreserving { residual: f64 },

    #[error("channel validation failed: {0}")]
    InvalidChannel(String),

    #[error(
        "coherence operator outside the admissible family \
         (span residual {span_residual:.3e}, coefficient norm² {norm_sq:.6})"
    )]
    InvalidCoherence { span_residual: f64, norm_sq: f64 },

    #[error("comb shape mismatch: {0}")]
    CombShape(String),

    #[error("state is not a valid density operator: {0}")]
    InvalidState(String),

    #[error("vector is not an eigenstate (residual {residual:.3e})")]
    NotEigenstate { residual: f64 },

    #[error("memory budget exceeded: {0}")]
    Budget(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
