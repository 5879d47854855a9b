//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any scgc operation.
#[derive(Debug, Error)]
pub enum ScgcError {
    /// Matrix/vector shapes do not line up.
    #[error("dimension mismatch in {op}: {lhs} vs {rhs}")]
    DimMismatch {
        op: &'static str,
        lhs: String,
        rhs: String,
    },

    /// An argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A NaN or infinity appeared where a finite value is required.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Training produced a non-finite loss; aborted with context.
    #[error("training diverged at {phase} epoch {epoch} batch {batch}: {detail}")]
    Diverged {
        phase: &'static str,
        epoch: usize,
        batch: usize,
        detail: String,
    },

    /// A text input failed to parse.
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ScgcError>;
