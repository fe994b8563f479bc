//! Batch CLI plumbing for the manifold Fourier inversion library: TOML
//! experiment configs, CSV reports and the verify / converge / breakdown /
//! props runners.

pub mod config;
pub mod report;
pub mod runner;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] geofourier_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// CLI exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub use config::ExperimentConfig;
pub use report::{read_csv, write_csv, write_summary, ReportRow};
pub use runner::{
    run_breakdown_demo, run_convergence, run_property_suite, run_verify, PropertyResult,
    RunOutcome,
};
