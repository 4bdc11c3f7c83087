// SPDX-License-Identifier: MIT OR Apache-2.0

use lancet_client::ClientError;
use lancet_core::{Error, ErrorCategory};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Core(#[from] Error),

    #[error("{0}")]
    Client(#[from] ClientError),

    #[error("solver stopped after {sweeps} sweeps without converging")]
    NotConverged { sweeps: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        let category = match self {
            CliError::Usage(_) => return 1,
            CliError::NotConverged { .. } => return 4,
            CliError::Core(e) => e.category(),
            CliError::Client(e) => e.category(),
        };
        match category {
            ErrorCategory::Validation | ErrorCategory::Io => 2,
            ErrorCategory::Transport => 3,
            ErrorCategory::Numeric => 4,
        }
    }

    /// Machine-readable error code for the message line.
    pub fn code(&self) -> &str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::NotConverged { .. } => "NotConverged",
            CliError::Core(e) => e.code(),
            CliError::Client(e) => e.code().unwrap_or("TransportError"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
