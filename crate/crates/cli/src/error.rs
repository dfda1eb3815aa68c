use std::path::PathBuf;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Netlist { path: PathBuf, message: String },
    #[error("{0}")]
    Engine(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config { .. } | CliError::Netlist { .. } => ExitCode::from(2),
            CliError::Engine(_) | CliError::Io { .. } => ExitCode::from(1),
        }
    }

    pub fn engine(context: &str, err: impl std::fmt::Display) -> Self {
        CliError::Engine(format!("{context}: {err}"))
    }
}
