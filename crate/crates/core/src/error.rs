use std::path::PathBuf;

use thiserror::Error;

use crate::data::idx::IdxError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed {what}: {detail}")]
    Format {
        path: PathBuf,
        what: &'static str,
        detail: String,
    },
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("evaluation: {0}")]
    Eval(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            what,
            detail: detail.into(),
        }
    }
}
