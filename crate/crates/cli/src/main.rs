//! `fdatest`: paired-sample location tests for functional data.
//!
//! Subcommands mirror the experiment drivers: `test` and `calibrate` analyze
//! a dataset from CSV; `simulate` writes synthetic samples; `power`,
//! `asymp-power`, `robustness`, and `size` run the simulation studies. Every
//! subcommand takes a JSON config (`--config`) plus a few flag overrides, and
//! all output is deterministic in (config, seed).
//!
//! Exit codes: 0 success, 2 input/format error, 3 degenerate statistics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fdatest::harness::{
    self, parse_curves_csv, parse_paired_csv, sample_to_csv, ExperimentConfig, HarnessError,
    Scenario,
};
use fdatest::procsim::ProcessSampler;
use fdatest::seeding::mix;

#[derive(Parser)]
#[command(
    name = "fdatest",
    version,
    about = "Spatial sign and signed-rank tests for functional data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// JSON experiment config; defaults apply for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's replicate count.
    #[arg(long)]
    replicates: Option<usize>,
    /// Override the config's significance level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct DataOpts {
    /// CSV of difference curves W = Y - X (header = grid points).
    #[arg(long, conflicts_with_all = ["x", "y"])]
    w: Option<PathBuf>,
    /// CSV of first-coordinate curves (requires --y).
    #[arg(long, requires = "y")]
    x: Option<PathBuf>,
    /// CSV of second-coordinate curves (requires --x).
    #[arg(long, requires = "x")]
    y: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured tests on a dataset and print JSON reports.
    Test {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        data: DataOpts,
    },
    /// Estimate null spectra and critical values for a dataset (JSON).
    Calibrate {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        data: DataOpts,
    },
    /// Generate a synthetic sample and write it as curve CSV.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        /// Number of curves (defaults to the config's n).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Empirical sizes under the configured null process (CSV).
    Size {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Finite-sample power over the configured shift grid (CSV).
    Power {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Asymptotic power under shrinking shifts (CSV).
    AsympPower {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Contamination robustness study: sizes and powers across epsilon (CSV).
    Robustness {
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    harness::init_threads();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn load_config(common: &CommonOpts, scenario: Scenario) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::from_json(&format!(
            "{{\"scenario\": {}}}",
            serde_json::to_string(&scenario).expect("scenario serializes")
        ))?,
    };
    config.scenario = scenario;
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(replicates) = common.replicates {
        config.replicates = replicates;
    }
    if let Some(alpha) = common.alpha {
        config.alpha = alpha;
    }
    config.validate()?;
    Ok(config)
}

fn load_data(data: &DataOpts) -> Result<fdatest::PairedDiffSample, HarnessError> {
    match (&data.w, &data.x, &data.y) {
        (Some(w), None, None) => parse_curves_csv(w),
        (None, Some(x), Some(y)) => parse_paired_csv(x, y),
        _ => Err(HarnessError::Format {
            line: None,
            msg: "provide either --w, or both --x and --y".into(),
        }),
    }
}

fn emit(common: &CommonOpts, text: &str) -> Result<(), HarnessError> {
    match &common.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Test { common, data } => {
            let config = load_config(&common, Scenario::SingleDataset)?;
            let sample = load_data(&data)?;
            let result = harness::run_single(&config, &sample)?;
            let json = serde_json::to_string_pretty(&result)
                .map_err(|e| HarnessError::Io(e.to_string()))?;
            emit(&common, &format!("{json}\n"))
        }
        Command::Calibrate { common, data } => {
            let config = load_config(&common, Scenario::SingleDataset)?;
            let sample = load_data(&data)?;
            let reports = harness::calibrate_only(&config, &sample)?;
            let json = serde_json::to_string_pretty(&reports)
                .map_err(|e| HarnessError::Io(e.to_string()))?;
            emit(&common, &format!("{json}\n"))
        }
        Command::Simulate { common, n } => {
            let config = load_config(&common, Scenario::NullSize)?;
            let n = n.unwrap_or(config.n);
            let sample = match &config.contamination {
                None => {
                    let sampler = ProcessSampler::new(config.build_process_spec()?);
                    sampler.sample(n, mix(config.master_seed, 1))?
                }
                Some(c) => {
                    let spec =
                        config.build_contamination_spec(c.epsilon, c.scale, c.fixed_count)?;
                    fdatest::procsim::ContaminatedSampler::new(spec)
                        .sample(n, mix(config.master_seed, 1))?
                }
            };
            emit(&common, &sample_to_csv(&sample))
        }
        Command::Size { common } => {
            let config = load_config(&common, Scenario::NullSize)?;
            let result = harness::run_null_size(&config)?;
            emit(&common, &result.to_csv_string())
        }
        Command::Power { common } => {
            let config = load_config(&common, Scenario::PowerCurve)?;
            let result = harness::run_power_curves(&config)?;
            emit(&common, &result.to_csv_string())
        }
        Command::AsympPower { common } => {
            let config = load_config(&common, Scenario::AsymptoticPower)?;
            let result = harness::run_asymp_power(&config)?;
            emit(&common, &result.to_csv_string())
        }
        Command::Robustness { common } => {
            let config = load_config(&common, Scenario::Robustness)?;
            let result = harness::run_robustness(&config)?;
            emit(&common, &result.to_csv_string())
        }
    }
}
