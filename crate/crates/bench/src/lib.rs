//! Experiment orchestration for `lpiopt-core`: JSON-configured optimizer
//! comparisons, interpolation rate checks, spectral checks and bound tables.

pub mod config;
pub mod experiment;
pub mod tables;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, ComparisonRow, ExperimentOutcome, Manifest};
pub use tables::{rate_fit, scaling_table, Regime};

/// Failures of the command-line front end, each tied to one exit code.
#[derive(Debug)]
pub enum BenchError {
    /// Invalid configuration or input data.
    Config(String),
    /// Invalid command-line input outside a config file.
    Input(String),
    /// The requested grid exceeds the cap; nothing was run.
    Infeasible(String),
    /// The runtime cap was hit; partial outputs were written and flagged.
    RuntimeCap(Box<ExperimentOutcome>),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Input(_) => 2,
            BenchError::Infeasible(_) => 3,
            BenchError::RuntimeCap(_) => 4,
        }
    }
}

impl std::fmt::Display for BenchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BenchError::Config(m) => write!(f, "invalid configuration: {m}"),
            BenchError::Input(m) => write!(f, "invalid input: {m}"),
            BenchError::Infeasible(m) => write!(f, "infeasible schedule: {m}"),
            BenchError::RuntimeCap(o) => write!(
                f,
                "runtime cap reached; partial outputs in {} ({})",
                o.output_dir.display(),
                o.manifest.truncated_runs.join(", ")
            ),
        }
    }
}

impl std::error::Error for BenchError {}
