use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("inconsistent data: {0}")]
    Consistency(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("unsupported schema: {0}")]
    Schema(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("chain produced a non-finite {parameter} at iteration {iteration}")]
    Divergence { iteration: usize, parameter: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
