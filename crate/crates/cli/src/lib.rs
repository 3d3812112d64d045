//! Command-line orchestration of the research-geography pipeline: a single
//! TOML config, stage-by-stage persisted artifacts with provenance, digest
//! based skipping and report emission.

pub mod config;
pub mod pipeline;
pub mod report;
mod stages;

pub use config::RunConfig;
pub use pipeline::{run, RunOptions, Stage};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("stage `{stage}` needs the `{artifact}` artifact, which is missing; run `gptatlas {producer}` first")]
    MissingPrerequisite {
        stage: &'static str,
        artifact: &'static str,
        producer: &'static str,
    },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Internal(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingPrerequisite { .. } => 2,
            CliError::Validation(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}
