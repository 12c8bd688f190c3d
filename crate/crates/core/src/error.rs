use thiserror::Error;

/// Errors raised by every fallible operation in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch on axis `{axis}`: expected {expected}, got {got}")]
    Dimension {
        axis: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("tape already consumed by a backward pass")]
    TapeConsumed,
    #[error("out of bounds: {0}")]
    Bounds(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(axis: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Dimension {
            axis: axis.into(),
            expected,
            got,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
