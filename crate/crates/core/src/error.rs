use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::trace::ContentId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: content id {id} is outside the catalog of {catalog_size} contents")]
    ContentOutOfRange {
        line: usize,
        id: u64,
        catalog_size: usize,
    },

    #[error("hit rate is undefined for an empty run")]
    UndefinedRate,

    #[error("policy contract violated at t={t}: {id} is not cached")]
    ContractViolation { t: usize, id: ContentId },

    #[error("eviction requested with an empty candidate set")]
    EmptyCandidates,

    #[error("predictor update produced a non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
