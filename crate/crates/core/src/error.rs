use thiserror::Error;

/// Errors raised by the feature, design, learning and pipeline layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid level: {0}")]
    InvalidLevel(String),

    #[error("invalid feature index: {0}")]
    InvalidIndex(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimError { expected: usize, got: usize },

    #[error("invalid feature count M={m}: {reason}")]
    InvalidM { m: usize, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("solver did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    ConvergenceError { iterations: usize, grad_norm: f64 },

    #[error("parse error at row {row}, column {col}: {msg}")]
    ParseError { row: usize, col: usize, msg: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("model format error at line {line}: {msg}")]
    ModelFormat { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimError { expected, got });
    }
    Ok(())
}
