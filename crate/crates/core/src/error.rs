use thiserror::Error;

use crate::driver::RunRecord;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("block index {index} out of range for {blocks} blocks")]
    BlockOutOfRange { index: usize, blocks: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid block partition: {0}")]
    Partition(String),

    #[error("iterate became non-finite in epoch {epoch}")]
    Diverged {
        epoch: usize,
        /// Records of the epochs completed before the failure.
        records: Vec<RunRecord>,
    },

    #[error("matrix is not positive definite (smallest eigenvalue {0})")]
    NotPositiveDefinite(f64),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_err<S: Into<String>>(msg: S) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
