//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by constructors and fallible numeric operations.
///
/// Plain arithmetic (matmul, add, sub) treats shape mismatches as contract
/// violations and panics instead; these variants cover the cases a caller
/// can reasonably hit with validated-but-unsuitable inputs.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid matrix data: {0}")]
    InvalidMatrix(String),

    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("QR requires rows >= cols, got {rows}x{cols}")]
    QrShape { rows: usize, cols: usize },

    #[error("Newton-Schulz requires a nonzero matrix")]
    ZeroMatrix,

    #[error("rank constraint violated: r_hat + s = {l} exceeds min(m, n) = {limit}")]
    RankConstraint { l: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
