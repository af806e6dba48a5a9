use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed model data: shape mismatch, empty model, non-finite entries.
    #[error("structural error: {0}")]
    Structural(String),

    /// Model file could not be parsed.
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },

    /// A validated condition needed by the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Caller combined inputs the operation does not support.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate chain: {0}")]
    DegenerateChain(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("model error: {0}")]
    Model(String),

    /// Iterative method did not converge; carries the last iterate.
    #[error("numeric error: {msg}")]
    Numeric { msg: String, last_iterate: Vec<f64> },

    /// A result contradicts what the theory guarantees for valid inputs.
    #[error("consistency error: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
