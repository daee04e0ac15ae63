use thiserror::Error;

/// Errors produced by graph construction, generation, inference and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A field, message or free energy became non-finite, or a required
    /// normalizer vanished. Carries enough context to locate the failure.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
