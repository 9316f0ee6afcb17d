//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by game construction, analysis oracles, and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or input value is structurally invalid. `path` names
    /// the offending field (e.g. `game.rewards[2]`).
    #[error("invalid {path}: {message}")]
    Validation { path: String, message: String },

    /// An enumeration oracle would exceed its work budget.
    #[error("enumeration budget exceeded: {required} profiles required, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    /// Filesystem failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed artifact file (config, game, record, trace).
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    /// A mathematical invariant the library relies on was violated.
    /// Indicates a bug, not a user error.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
