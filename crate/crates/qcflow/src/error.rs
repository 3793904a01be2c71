use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid error: {0}")]
    Grid(String),

    #[error("field error: {0}")]
    Field(String),

    #[error("obstacle set error: {0}")]
    Obstacle(String),

    #[error("operator error: {0}")]
    Operator(#[from] OperatorError),

    #[error("evolution error: {0}")]
    Evolve(String),

    #[error("envelope error: {0}")]
    Envelope(String),

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Errors raised at the operator evaluation interface.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    /// p = 0 is outside the operator domain; callers route vanishing
    /// gradients through `mu`.
    #[error("gradient argument must be nonzero")]
    ZeroGradient,

    #[error("measure argument {0} out of range")]
    MeasureOutOfRange(f64),

    #[error("r = {0} outside operator domain")]
    InvalidR(f64),

    #[error("invalid operator parameter: {0}")]
    InvalidParam(String),
}

pub type Result<T> = std::result::Result<T, Error>;
