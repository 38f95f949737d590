use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Solver(#[from] dgflow_core::Error),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("config: {0}")]
    ConfigSyntax(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BenchError {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config { key: key.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
