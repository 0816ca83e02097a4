use thiserror::Error;

/// Errors raised by the numerical kernels, estimators and file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("{op} did not converge (residual {residual:e})")]
    NoConvergence { op: &'static str, residual: f64 },

    #[error("rank deficiency detected at column {column} (|r_jj| = {magnitude:e})")]
    RankDeficient { column: usize, magnitude: f64 },

    #[error("matrix is numerically singular: {0}")]
    Singular(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("angle grids do not match")]
    GridMismatch,

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
