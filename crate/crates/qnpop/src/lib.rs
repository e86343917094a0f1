//! Experiment harness for `qnpop-core`: TOML configs, parallel Monte Carlo
//! drivers with deterministic reduction, CSV/JSONL/JSON output and the
//! `qnpop` command line.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod io;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind, ModelRef, Tolerances};
pub use experiments::{run, run_generator_check, run_lln, run_moment_compare, run_tau_decay, run_wf_reduction};
pub use report::{ExperimentReport, Verdict};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] qnpop_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 for run-time
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 3,
        }
    }
}
