use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("insufficient symbols: need {needed} correlation pairs, stream provides {available}")]
    InsufficientSymbols { needed: usize, available: usize },

    #[error("stream contains no samples or no symbol boundaries")]
    EmptyStream,

    #[error("{name} out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("signal has zero power over its occupied symbols")]
    ZeroPower,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn out_of_range(name: &'static str, value: f64) -> Self {
        Error::OutOfRange { name, value }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
