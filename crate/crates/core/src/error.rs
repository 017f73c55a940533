//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A function evaluated to a non-finite value at a quadrature node.
    #[error("non-finite value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A linear solve or factorization hit a (near-)singular matrix.
    #[error("singular matrix in {what} (condition number {cond:.3e})")]
    Singular { what: String, cond: f64 },

    /// A root bracket was requested where the function does not change sign.
    #[error("no sign change of {what} on [{lo}, {hi}]")]
    NoBracket { what: String, lo: f64, hi: f64 },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("parse error at {pointer}: {message}")]
    Parse { pointer: String, message: String },

    #[error("validation error at {pointer}: {message}")]
    Validation { pointer: String, message: String },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    /// An error from a named stage of a multi-stage pipeline.
    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wrap the error with a pipeline stage tag.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The outermost stage tag, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

/// Attach a stage tag to the error of a fallible expression.
pub(crate) fn staged<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.at_stage(stage))
}
