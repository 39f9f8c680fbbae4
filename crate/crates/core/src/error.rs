use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed dataset file.
    #[error("format error in {path} at row {row}, column '{column}': {message}")]
    Format {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    /// Dataset-level invariant violations, one message per offending row.
    #[error("validation error: {}", .0.join("; "))]
    Validation(Vec<String>),

    /// Every slab above the equilibrium marker has non-positive excess activity.
    #[error("no datable excess 210Pb above the equilibrium depth")]
    NoDatableExcess,

    /// Fewer datable slabs than the CRS inventory needs.
    #[error("need at least {needed} datable slabs, found {found}")]
    TooFewSlabs { needed: usize, found: usize },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
