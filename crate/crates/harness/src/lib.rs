//! Config-driven runs of the kantoreg pipeline with a resumable stage ledger.

pub mod config;
pub mod ledger;
pub mod pipeline;
pub mod report;

use std::path::Path;

pub use config::{DensityConfig, DomainConfig, ExperimentConfig, SeedingKind, DIAGNOSTICS};
pub use ledger::{read_ledger, stage_key, LedgerEntry, LedgerWriter, RunLedger, StageStatus};
pub use pipeline::{level_dir, report, run, RunOptions, Until};
pub use report::{emit_plots, summarize, LevelSummary, LogLogPlot, SlopeFit, Summary};

#[derive(Clone, Debug, thiserror::Error, PartialEq)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("ledger: {0}")]
    Ledger(String),
    #[error("stage failed: {0}")]
    Stage(String),
    #[error("missing report: {0}")]
    MissingReport(String),
}

impl HarnessError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        HarnessError::Io { path: path.display().to_string(), msg: e.to_string() }
    }

    /// Process exit code: 2 for configuration errors, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}
