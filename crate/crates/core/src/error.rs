use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The operation is not defined for this kind of input.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// An integral required by the operation diverges.
    #[error("divergent integral: {0}")]
    Divergent(String),
    /// Malformed input data (grids, directions, matrices).
    #[error("validation error: {0}")]
    Validation(String),
    /// A target law is not in the range of the mapping.
    #[error("not in range: {0}")]
    Range(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    /// Malformed JSON input.
    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
