use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("invalid pattern: {0}")]
    Pattern(String),
    #[error("matrix is singular")]
    Singular,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("degenerate slice: {0}")]
    DegenerateSlice(String),
    #[error("dataset block {block} cannot be transformed: {reason}")]
    DeficientBlock { block: usize, reason: String },
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
