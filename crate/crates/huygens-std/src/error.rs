use std::path::PathBuf;

use thiserror::Error;

/// Failure of a command. Each variant maps to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(#[from] huygens_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input {path}: {reason}")]
    Input { path: PathBuf, reason: String },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 1 for anything the user can fix in the invocation or its files, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numeric(huygens_core::Error::InvalidParameter(_))
            | CliError::Numeric(huygens_core::Error::Shape { .. })
            | CliError::Numeric(huygens_core::Error::NonFinite(_))
            | CliError::Numeric(huygens_core::Error::UnsupportedModel(_)) => 1,
            CliError::Numeric(_) => 2,
            CliError::Config(_) | CliError::Io { .. } | CliError::Input { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
