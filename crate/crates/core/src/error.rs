use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("signal of {samples} samples is shorter than one {window}-sample analysis window")]
    TooShort { samples: usize, window: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("front-end mismatch: model built for config {expected:016x}, features from {got:016x}")]
    ConfigMismatch { expected: u64, got: u64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no trials for class `{0}`")]
    EmptyClass(String),
    #[error("degenerate score distribution: {0}")]
    Degenerate(String),
    #[error("matrix is not positive semi-definite")]
    NotPositiveDefinite,
    #[error("solver did not converge within {0} iterations")]
    NoConvergence(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
