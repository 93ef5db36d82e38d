use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) | CliError::Output(_) => ExitCode::from(2),
            CliError::Solver(_) => ExitCode::from(3),
        }
    }
}

impl From<ortho_core::Error> for CliError {
    fn from(e: ortho_core::Error) -> Self {
        match e {
            ortho_core::Error::NotConverged { .. } => CliError::Solver(e.to_string()),
            ortho_core::Error::Io(_) | ortho_core::Error::Csv(_) | ortho_core::Error::Json(_) => {
                CliError::Output(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}
