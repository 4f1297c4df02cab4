use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("configuration failed validation:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("graph is disconnected; {0}")]
    Disconnected(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("template error: {0}")]
    Template(String),

    #[error("policy failed for agent {agent} on day {day}: {source}")]
    Policy {
        agent: usize,
        day: u32,
        #[source]
        source: crate::policy::PolicyError,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
