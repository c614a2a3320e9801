use thiserror::Error;

/// An invalid argument or configuration value.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct ArgumentError {
    pub message: String,
}

impl ArgumentError {
    pub fn new(message: impl Into<String>) -> Self {
        ArgumentError {
            message: message.into(),
        }
    }
}

/// A malformed line in an annotated corpus or a serialized model.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("sample totals must be positive (n_de = {n_de}, n_nu = {n_nu})")]
    ZeroTotals { n_de: u64, n_nu: u64 },
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Any failure of the library's operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Argument(#[from] ArgumentError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}
