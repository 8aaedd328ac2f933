use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vectors or collections whose sizes must agree do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// A simulation parameter violates its invariant.
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParam { key: &'static str, reason: String },

    /// Something that should not happen for any valid input.
    #[error("internal error: {0}")]
    Internal(String),

    /// A sweep point failed; `label` names the axis value.
    #[error("sweep point {label}: {source}")]
    Point {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("worker pool: {0}")]
    Pool(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn param(key: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            key,
            reason: reason.into(),
        }
    }
}
