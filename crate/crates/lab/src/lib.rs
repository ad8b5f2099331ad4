//! Experiment runner for the `tiletower` library: configuration, experiments, artifacts and
//! the acceptance criteria.

pub mod acceptance;
pub mod cli;
pub mod config;
pub mod experiments;
pub mod report;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LabError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("io: {0}")]
    Io(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) | LabError::Config(_) => cli::EXIT_USAGE,
            LabError::Validation(_) | LabError::Io(_) => cli::EXIT_FAIL,
        }
    }
}
