//! Library side of the `glmb` command: scenario runs with per-trial CSV/JSON
//! output, solver scaling benchmarks and standalone ranked assignment.

pub mod assign;
pub mod bench;
pub mod config;
pub mod run;

use thiserror::Error;

/// Version of the CSV and JSON output schemas.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or input files: exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Anything that went wrong while running: exit code 1.
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<glmb::GlmbError> for CliError {
    fn from(e: glmb::GlmbError) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
