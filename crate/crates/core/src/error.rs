use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulator, agents and experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("invalid configuration `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("missing checkpoint for scenario {scenario}, method {method}, seed {seed}: {path}")]
    MissingCheckpoint {
        scenario: String,
        method: String,
        seed: u64,
        path: PathBuf,
    },
    #[error("checkpoint format: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
