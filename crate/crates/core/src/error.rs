use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The variants map onto the command-line exit codes: configuration problems
/// (`Parse`, `InvalidParameter`), numerical failures (`Numerical`) and
/// infeasible design problems (`Infeasible`). `Domain` covers a violated
/// operation precondition.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("{0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by bad configuration input.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::InvalidParameter { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
