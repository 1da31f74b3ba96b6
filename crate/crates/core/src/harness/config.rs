//! Experiment configuration (JSON).
//!
//! Configs deserialize from JSON with unknown keys rejected; every field has
//! a default so a minimal file like `{"scenario": "null_size"}` runs the
//! standard setup (sBm, n = 20, m = 250, 1000 replicates, all five tests).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fspace::Grid;
use crate::meantests::MeanTestConfig;
use crate::nulldist::CalibrationConfig;
use crate::procsim::{ContaminationSpec, ProcessKind, ProcessSpec, ShiftFamily, ShiftSpec};
use crate::signstats::TestId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    NullSize,
    PowerCurve,
    AsymptoticPower,
    Robustness,
    SingleDataset,
}

/// How experiment replicates obtain their critical values.
///
/// `OracleNull` estimates the covariance spectra once from a large sample of
/// the clean null process (`calibration_curves`) and keeps the resulting
/// critical values fixed across replicates: the usual design for Monte
/// Carlo size/power studies, where the null process is known. It is also
/// what exposes the non-robustness of the mean-based tests: under
/// contamination their fixed critical values become too small for the
/// inflated data and they over-reject. `PerReplicate` re-derives the null
/// law from each replicate's own sample, the procedure available to a
/// practitioner holding a single dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    #[default]
    OracleNull,
    PerReplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProcessConfig {
    #[default]
    Sbm,
    T {
        df: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub a: f64,
    pub b: f64,
    pub m: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            a: 0.0,
            b: 1.0,
            m: 250,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationConfig {
    pub epsilon: f64,
    #[serde(default = "default_contaminant_scale")]
    pub scale: f64,
    #[serde(default)]
    pub fixed_count: bool,
}

fn default_contaminant_scale() -> f64 {
    4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftPoint {
    pub family: FamilyName,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Eta1,
    Eta2,
    Eta3,
}

impl ShiftPoint {
    pub fn to_spec(self) -> Result<ShiftSpec> {
        let family = match self.family {
            FamilyName::Eta1 => ShiftFamily::Eta1,
            FamilyName::Eta2 => ShiftFamily::Eta2,
            FamilyName::Eta3 => ShiftFamily::Eta3,
        };
        ShiftSpec::new(family, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibOptions {
    #[serde(default = "default_mc_draws")]
    pub mc_draws: usize,
    #[serde(default = "default_drop_tol")]
    pub drop_tol: f64,
}

fn default_mc_draws() -> usize {
    100_000
}

fn default_drop_tol() -> f64 {
    1e-12
}

impl Default for CalibOptions {
    fn default() -> Self {
        CalibOptions {
            mc_draws: default_mc_draws(),
            drop_tol: default_drop_tol(),
        }
    }
}

impl CalibOptions {
    pub fn to_calibration(self, seed: u64) -> CalibrationConfig {
        CalibrationConfig {
            mc_draws: self.mc_draws,
            seed,
            drop_tol: self.drop_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanOptions {
    #[serde(default = "default_variance_threshold")]
    pub variance_threshold: f64,
    #[serde(default)]
    pub l_override: Option<usize>,
}

fn default_variance_threshold() -> f64 {
    0.85
}

impl Default for MeanOptions {
    fn default() -> Self {
        MeanOptions {
            variance_threshold: default_variance_threshold(),
            l_override: None,
        }
    }
}

impl MeanOptions {
    pub fn to_mean_config(self, alpha: f64) -> Result<MeanTestConfig> {
        MeanTestConfig::new(self.variance_threshold, self.l_override, alpha)
    }
}

/// The robustness protocol: contamination levels scanned for sizes and
/// powers, and the location shift used for the power columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessOptions {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_contaminant_scale")]
    pub contaminant_scale: f64,
    #[serde(default = "default_power_shift")]
    pub power_shift: ShiftPoint,
    #[serde(default)]
    pub fixed_count: bool,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.0, 0.05, 0.15, 0.25]
}

fn default_power_shift() -> ShiftPoint {
    ShiftPoint {
        family: FamilyName::Eta2,
        c: 0.8,
    }
}

impl Default for RobustnessOptions {
    fn default() -> Self {
        RobustnessOptions {
            epsilons: default_epsilons(),
            contaminant_scale: default_contaminant_scale(),
            power_shift: default_power_shift(),
            fixed_count: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub process: ProcessConfig,
    #[serde(default)]
    pub grid: GridConfig,
    /// Expansion truncation; defaults to the grid size.
    #[serde(default)]
    pub kl_terms: Option<usize>,
    /// Contaminate generated samples (null_size / power_curve scenarios).
    #[serde(default)]
    pub contamination: Option<ContaminationConfig>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub shift_grid: Vec<ShiftPoint>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub calib: CalibOptions,
    #[serde(default = "default_tests")]
    pub tests: Vec<TestId>,
    #[serde(default)]
    pub mean_config: MeanOptions,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub robustness: Option<RobustnessOptions>,
    /// How experiment replicates get their critical values.
    #[serde(default)]
    pub calibration_mode: CalibrationMode,
    /// Size of the large clean-null sample used by oracle calibration and by
    /// the asymptotic-power pipeline.
    #[serde(default = "default_calibration_curves")]
    pub calibration_curves: usize,
}

fn default_n() -> usize {
    20
}

fn default_replicates() -> usize {
    1000
}

fn default_alpha() -> f64 {
    0.05
}

fn default_tests() -> Vec<TestId> {
    TestId::ALL.to_vec()
}

fn default_calibration_curves() -> usize {
    5000
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            serde_json::from_str(json).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        if self.tests.is_empty() {
            return Err(Error::invalid("tests must be nonempty"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if matches!(
            self.scenario,
            Scenario::PowerCurve | Scenario::AsymptoticPower
        ) && self.shift_grid.is_empty()
        {
            return Err(Error::invalid(
                "shift_grid must be nonempty for power scenarios",
            ));
        }
        for p in &self.shift_grid {
            p.to_spec()?;
        }
        if let Some(c) = &self.contamination {
            if !(0.0..1.0).contains(&c.epsilon) {
                return Err(Error::invalid("contamination epsilon must be in [0,1)"));
            }
        }
        self.calib.to_calibration(0).validate()?;
        self.mean_config.to_mean_config(self.alpha)?;
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        Grid::equispaced(self.grid.a, self.grid.b, self.grid.m)
    }

    pub fn build_process_spec(&self) -> Result<ProcessSpec> {
        let grid = self.build_grid()?;
        let kind = match self.process {
            ProcessConfig::Sbm => ProcessKind::SBm,
            ProcessConfig::T { df } => ProcessKind::TProcess { df },
        };
        let terms = self.kl_terms.unwrap_or(grid.len());
        ProcessSpec::new(kind, terms, grid)
    }

    pub fn build_contamination_spec(
        &self,
        epsilon: f64,
        scale: f64,
        fixed_count: bool,
    ) -> Result<ContaminationSpec> {
        let clean = self.build_process_spec()?;
        let mut spec = ContaminationSpec::new(epsilon, clean, scale)?;
        spec.fixed_count = fixed_count;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_has_paper_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"scenario": "null_size"}"#).unwrap();
        assert_eq!(cfg.n, 20);
        assert_eq!(cfg.replicates, 1000);
        assert_eq!(cfg.grid.m, 250);
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.tests.len(), 5);
        assert_eq!(cfg.calib.mc_draws, 100_000);
        assert_eq!(cfg.mean_config.variance_threshold, 0.85);
        assert_eq!(cfg.calibration_curves, 5000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r = ExperimentConfig::from_json(r#"{"scenario": "null_size", "bogus": 1}"#);
        assert!(r.is_err());
        let r = ExperimentConfig::from_json(
            r#"{"scenario": "null_size", "calib": {"mc_draws": 5000, "typo": 2}}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn config_roundtrips_through_json() {
        let cfg = ExperimentConfig::from_json(
            r#"{
                "scenario": "robustness",
                "process": {"kind": "t", "df": 5},
                "n": 10,
                "replicates": 50,
                "shift_grid": [{"family": "eta2", "c": 0.8}],
                "master_seed": 77
            }"#,
        )
        .unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn validation_catches_bad_settings() {
        assert!(
            ExperimentConfig::from_json(r#"{"scenario": "null_size", "replicates": 0}"#).is_err()
        );
        assert!(ExperimentConfig::from_json(r#"{"scenario": "null_size", "tests": []}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"scenario": "null_size", "alpha": 1.5}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"scenario": "power_curve"}"#).is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"scenario": "null_size", "calib": {"mc_draws": 10}}"#
        )
        .is_err());
    }
}
