use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::mdp::ValidationReport;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid environment specification:\n{0}")]
    InvalidSpec(ValidationReport),

    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration value failed parsing or validation. `path` is the
    /// dotted JSON path of the offending key.
    #[error("config error at `{path}`: {rule}")]
    Config { path: String, rule: String },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("chart input error: {0}")]
    Chart(String),
}

impl SimError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(path: impl Into<String>, rule: impl Into<String>) -> Self {
        SimError::Config {
            path: path.into(),
            rule: rule.into(),
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
