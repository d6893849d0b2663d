use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

/// Exit status for configuration problems detected before any simulation.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for failures while running.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Config {
        message: String,
        path: Option<PathBuf>,
    },
    #[error("{message}")]
    Runtime {
        message: String,
        path: Option<PathBuf>,
    },
}

impl CliError {
    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime {
            message: e.to_string(),
            path: None,
        }
    }

    pub fn runtime_at(e: impl std::fmt::Display, path: impl Into<PathBuf>) -> Self {
        CliError::Runtime {
            message: e.to_string(),
            path: Some(path.into()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Runtime { .. } => EXIT_RUNTIME,
        }
    }

    /// One-line JSON record for stderr.
    pub fn record(&self) -> String {
        let (kind, message, path) = match self {
            CliError::Config { message, path } => ("config", message, path),
            CliError::Runtime { message, path } => ("runtime", message, path),
        };
        json!({
            "error": {
                "kind": kind,
                "message": message,
                "path": path.as_ref().map(|p| p.display().to_string()),
                "exit_code": self.exit_code(),
            }
        })
        .to_string()
    }
}
