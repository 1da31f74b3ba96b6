//! Experiment harness: configuration, curve CSV ingestion, and the drivers
//! that reproduce the size, power, robustness, and asymptotic-power studies
//! as machine-readable CSV/JSON.

pub mod config;
pub mod experiment;
pub mod io;

pub use config::{
    CalibOptions, CalibrationMode, ContaminationConfig, ExperimentConfig, FamilyName, GridConfig,
    MeanOptions, ProcessConfig, RobustnessOptions, Scenario, ShiftPoint,
};
pub use experiment::{
    calibrate_only, init_threads, parse_embedded_config, run_asymp_power, run_experiment,
    run_null_size, run_power_curves, run_robustness, run_single, run_test, CalibrationReport,
    CellResult, ExperimentResult, Metric, SingleRunResult,
};
pub use io::{parse_curves_csv, parse_paired_csv, sample_from_csv_text, sample_to_csv};

use thiserror::Error as ThisError;

/// Harness-level errors: statistics errors plus I/O and format problems.
#[derive(Debug, ThisError)]
pub enum HarnessError {
    #[error("io error: {0}")]
    Io(String),

    #[error("format error{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Format { line: Option<usize>, msg: String },

    #[error(transparent)]
    Stat(#[from] crate::error::Error),
}

impl HarnessError {
    /// CLI exit code: 2 for input/format problems, 3 for degenerate
    /// statistics.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Io(_) | HarnessError::Format { .. } => 2,
            HarnessError::Stat(e) => match e {
                crate::error::Error::DegenerateNull
                | crate::error::Error::StandardizationUndefined { .. }
                | crate::error::Error::ShiftInKernel
                | crate::error::Error::ZeroCurve(_) => 3,
                _ => 2,
            },
        }
    }
}
