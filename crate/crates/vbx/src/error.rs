use thiserror::Error;

/// Errors produced by the diarization engine and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent caller input (dimensions, labels, ranges).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operation that requires at least one element received none.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A row that must be non-zero (for normalization or cosine similarity) is zero.
    #[error("degenerate input: row {index} has zero norm")]
    DegenerateRow { index: usize },

    /// A model object violates its own invariants (e.g. a covariance that is not
    /// positive definite).
    #[error("model error: {0}")]
    Model(String),

    /// Non-finite values or other numerical failure inside the inference loop.
    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    /// A metric that has no defined value for the given operands.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A reference problem too large for exact enumeration.
    #[error("oracle instance too large: {0}")]
    InstanceTooLarge(String),

    /// Text-format parse failure, with the 1-based line number.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
