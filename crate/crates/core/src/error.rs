use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error taxonomy shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Structural problems in an input file (wrong header, broken id sequence).
    #[error("schema error: {0}")]
    Schema(String),
    /// A balance-sheet invariant failed at a specific data row.
    #[error("validation error (row {row}): {message}")]
    ValidationAt { row: usize, message: String },
    /// A balance-sheet or network invariant failed.
    #[error("validation error: {0}")]
    Validation(String),
    /// A field could not be parsed as the expected type.
    #[error("parse error: {0}")]
    Parse(String),
    /// Invalid parameters or mismatched dimensions.
    #[error("config error: {0}")]
    Config(String),
    /// A numeric argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The requested target cannot be reached by any parameter value.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// An iterative solver hit its iteration cap.
    #[error("did not converge: {0}")]
    Convergence(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn validation_at(row: usize, msg: impl Into<String>) -> Self {
        Error::ValidationAt {
            row,
            message: msg.into(),
        }
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
