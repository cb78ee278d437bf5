use thiserror::Error;

/// Errors raised by the estimators, samplers and the data pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {left} points vs {right} points")]
    GridMismatch { left: usize, right: usize },

    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::GridMismatch { .. } => "grid-mismatch",
            Error::DegenerateDirection(_) => "degenerate-direction",
            Error::Domain(_) => "domain",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Numerical(_) => "numerical",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
