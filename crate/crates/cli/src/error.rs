use std::path::Path;

use thiserror::Error;

/// Failures surfaced by the command-line driver. Each maps to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("{path}: row {row}: {message}")]
    Row {
        path: String,
        row: usize,
        message: String,
    },

    #[error("{0}")]
    Input(String),

    #[error("{path}: invalid config: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Model(#[from] price_diffusion::Error),

    #[error("fit did not converge within the iteration budget (best objective {objective:e})")]
    NotConverged { objective: f64 },

    #[error("failed to write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged { .. } => 3,
            CliError::Output(_) => 1,
            _ => 2,
        }
    }
}
