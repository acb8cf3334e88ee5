use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad indices, shapes, or a call made outside its preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// A non-finite value showed up where only finite reals are valid.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A configured size or node budget would be exceeded.
    #[error("resource error: {0}")]
    Resource(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
