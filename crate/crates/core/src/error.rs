use thiserror::Error;

/// Errors raised by builders, oracles and the network file format.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("certification failed in stage `{stage}`: achieved {achieved:.3e} > target {target:.3e}")]
    Certification {
        stage: String,
        achieved: f64,
        target: f64,
    },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
