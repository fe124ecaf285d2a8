//! Batch runner for the pinlab toolkit: JSON configs, seeded runs, CSV
//! artifacts with a checksummed manifest, and the acceptance battery.

pub mod config;
pub mod manifest;
pub mod run;
pub mod suite;

use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_SATURATED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(#[from] config::ConfigError),

    #[error(transparent)]
    Core(#[from] pinlab_core::PinError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_INVALID,
            _ => EXIT_FAILURE,
        }
    }
}
