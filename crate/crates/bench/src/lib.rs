//! Experiment runner reproducing the accuracy, bound, robustness, tuning and
//! runtime studies of the fast-MUSIC estimators.
//!
//! [`config`] resolves an [`ExperimentConfig`](config::ExperimentConfig),
//! [`experiments::run_experiment`] produces rows in memory and
//! [`output::write_outputs`] puts them on disk with a manifest.

pub mod config;
pub mod experiments;
pub mod output;

use config::ExperimentConfig;
use output::{ExperimentOutput, Format};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

/// Process exit codes of the `fastmusic` binary.
pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const RUNTIME_ERROR: i32 = 1;
    /// Bad flags or config; nothing was written.
    pub const USAGE: i32 = 2;
    /// All outputs written, but some estimator runs failed.
    pub const COMPLETED_WITH_FAILURES: i32 = 3;
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => exit_code::USAGE,
            BenchError::Io(_) => exit_code::RUNTIME_ERROR,
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> String {
        let kind = match self {
            BenchError::Config(_) => "usage",
            BenchError::Io(_) => "io",
        };
        serde_json::json!({ "error": kind, "message": self.to_string() }).to_string()
    }
}

/// Runs `cfg` and writes its outputs. Returns the output and manifest path.
pub fn run_and_write(
    cfg: &ExperimentConfig,
    format: Format,
    threads: usize,
) -> Result<(ExperimentOutput, std::path::PathBuf), BenchError> {
    let started = output::unix_now();
    let out = experiments::run_experiment(cfg)?;
    let manifest = output::write_outputs(cfg, &out, format, threads, started)?;
    Ok((out, manifest))
}
