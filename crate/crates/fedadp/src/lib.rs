//! IO, configuration, and experiment orchestration around `fedadp-core`.
//!
//! The core crate holds the math (model, DP noise, feature importance,
//! federation); this crate owns files, the round loop's worker pool, and the
//! CLI surface: `fedadp run <config>`, `fedadp suite <preset...>`,
//! `fedadp heatmap <csv> <out.pgm>`.

pub use fedadp_core as core;

pub mod config;
pub mod experiment;
pub mod heatmap;
pub mod idx;
pub mod suite;

/// Harness-level failures, split by exit code: config and usage problems
/// exit 2, everything that goes wrong at runtime exits 1.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Usage(_) => 2,
            AppError::Runtime(_) => 1,
        }
    }
}

impl From<fedadp_core::Error> for AppError {
    fn from(e: fedadp_core::Error) -> Self {
        AppError::Runtime(anyhow::anyhow!(e.to_string()))
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Runtime(anyhow::Error::from(e))
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
