//! Command-line front end: argument parsing, validation and output layout.

pub mod config;
pub mod run;

pub use config::{parse_config, Cli, Command, ExperimentConfig};
pub use run::{execute, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(clap::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("output directory: {0}")]
    Output(String),
    #[error(transparent)]
    Solver(#[from] entsdp::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad invocations, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) => e.exit_code(),
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 1,
        }
    }
}
