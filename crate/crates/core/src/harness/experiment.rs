//! Experiment drivers.
//!
//! Every driver is a pure function of (config, master_seed): replicate r uses
//! seeds derived from `mix(master_seed, r)`, data and calibration draws get
//! separate substreams, and parallel execution collects results in replicate
//! order, so the output is identical for any thread count.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fspace::{Curve, PairedDiffSample};
use crate::harness::config::{CalibrationMode, ExperimentConfig, Scenario, ShiftPoint};
use crate::harness::HarnessError;
use crate::meantests::{choose_l, mean_test, t1, t2, t3, MeanTestConfig};
use crate::nulldist::{power_estimate, quantile, wchisq_draws, CalibrationConfig, WeightedChiSq};
use crate::procsim::{apply_shift, make_shift, ContaminatedSampler, ProcessSampler};
use crate::seeding::mix;
use crate::shrinkpower::{j1_hat, j2_hat};
use crate::signstats::{sign_test, signed_rank_test, t_s, t_sr, TestId, TestReport};
use crate::specops::{pi1_hat, pi2_hat, sigma_hat, spectrum, Spectrum};

const DATA_TAG: u64 = 1;
const TEST_TAG: u64 = 100;
const SINGLE_TAG: u64 = 500;
const SIZE_GROUP_TAG: u64 = 10_000;
const POWER_GROUP_TAG: u64 = 20_000;
const CURVE_GROUP_TAG: u64 = 30_000;
const ASYMP_SAMPLE_TAG: u64 = 40_000;
const ASYMP_CRIT_TAG: u64 = 41_000;
const ASYMP_POINT_TAG: u64 = 42_000;
const ORACLE_SAMPLE_TAG: u64 = 50_000;
const ORACLE_CRIT_TAG: u64 = 51_000;

/// Cap the rayon pool from FDATEST_THREADS; absent means hardware default.
pub fn init_threads() {
    if let Ok(v) = std::env::var("FDATEST_THREADS") {
        if let Ok(k) = v.trim().parse::<usize>() {
            if k >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global();
            }
        }
    }
}

/// Dispatch one calibrated test on one dataset.
pub fn run_test(
    test: TestId,
    sample: &PairedDiffSample,
    alpha: f64,
    mean_config: &MeanTestConfig,
    calib: &CalibrationConfig,
) -> Result<TestReport> {
    match test {
        TestId::Ts => sign_test(sample, alpha, calib),
        TestId::Tsr => signed_rank_test(sample, alpha, calib),
        TestId::T1 | TestId::T2 | TestId::T3 => mean_test(test, sample, mean_config, calib),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Size,
    Power,
}

impl Metric {
    pub fn label(&self) -> &'static str {
        match self {
            Metric::Size => "size",
            Metric::Power => "power",
        }
    }
}

/// One aggregated cell of an experiment matrix.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub test: TestId,
    pub metric: Metric,
    pub epsilon: Option<f64>,
    pub family: Option<String>,
    pub c: Option<f64>,
    /// Rejection rate (empirical size or power).
    pub rate: f64,
    /// Binomial Monte Carlo standard error `sqrt(rate (1-rate) / R)`.
    pub se: f64,
    pub mean_pvalue: Option<f64>,
    pub replicates: usize,
    /// Deterministic drift mass outside the retained eigenspace
    /// (asymptotic-power cells only).
    pub residual_shift: Option<f64>,
}

/// Full output of an experiment run, with the config echoed so any artifact
/// can be re-run exactly.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub wall_seconds: f64,
}

impl ExperimentResult {
    /// CSV with the config embedded as a leading comment line. Power
    /// scenarios use the plotting-friendly `family,c,test,power,se` layout.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str("# config: ");
        out.push_str(&self.config.to_json());
        out.push('\n');
        match self.config.scenario {
            Scenario::PowerCurve | Scenario::AsymptoticPower => {
                out.push_str("family,c,test,power,se,replicates,residual_shift\n");
                for cell in &self.cells {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        cell.family.as_deref().unwrap_or(""),
                        cell.c.map(|v| v.to_string()).unwrap_or_default(),
                        cell.test.label(),
                        cell.rate,
                        cell.se,
                        cell.replicates,
                        cell.residual_shift
                            .map(|v| v.to_string())
                            .unwrap_or_default(),
                    ));
                }
            }
            _ => {
                out.push_str("test,metric,epsilon,family,c,rate,se,mean_pvalue,replicates\n");
                for cell in &self.cells {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{}\n",
                        cell.test.label(),
                        cell.metric.label(),
                        cell.epsilon.map(|v| v.to_string()).unwrap_or_default(),
                        cell.family.as_deref().unwrap_or(""),
                        cell.c.map(|v| v.to_string()).unwrap_or_default(),
                        cell.rate,
                        cell.se,
                        cell.mean_pvalue.map(|v| v.to_string()).unwrap_or_default(),
                        cell.replicates,
                    ));
                }
            }
        }
        out
    }

    /// Pull a cell by coordinates (test, metric, epsilon, family, c).
    pub fn cell(
        &self,
        test: TestId,
        metric: Metric,
        epsilon: Option<f64>,
        c: Option<f64>,
    ) -> Option<&CellResult> {
        self.cells.iter().find(|cell| {
            cell.test == test
                && cell.metric == metric
                && matches_opt(cell.epsilon, epsilon)
                && matches_opt(cell.c, c)
        })
    }
}

fn matches_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() < 1e-12,
        _ => false,
    }
}

/// Recover the embedded config from a result CSV.
pub fn parse_embedded_config(
    csv_text: &str,
) -> std::result::Result<ExperimentConfig, HarnessError> {
    let first = csv_text.lines().next().unwrap_or_default();
    let json = first
        .strip_prefix("# config: ")
        .ok_or(HarnessError::Format {
            line: Some(1),
            msg: "missing embedded config line".into(),
        })?;
    ExperimentConfig::from_json(json).map_err(HarnessError::Stat)
}

enum AnySampler {
    Clean(ProcessSampler),
    Contaminated(ContaminatedSampler),
}

impl AnySampler {
    /// Draw a sample under the alternative: a clean process shifts every
    /// curve; a contaminated one shifts only its clean component (outliers
    /// are noise unrelated to the treatment effect).
    fn sample_shifted(
        &self,
        n: usize,
        seed: u64,
        shift: Option<&Curve>,
    ) -> Result<PairedDiffSample> {
        match self {
            AnySampler::Clean(s) => {
                let sample = s.sample(n, seed)?;
                match shift {
                    Some(shift) => apply_shift(&sample, shift),
                    None => Ok(sample),
                }
            }
            AnySampler::Contaminated(s) => s.sample_with_clean_shift(n, seed, shift),
        }
    }
}

fn build_sampler(config: &ExperimentConfig) -> Result<AnySampler> {
    match &config.contamination {
        None => Ok(AnySampler::Clean(ProcessSampler::new(
            config.build_process_spec()?,
        ))),
        Some(c) => Ok(AnySampler::Contaminated(ContaminatedSampler::new(
            config.build_contamination_spec(c.epsilon, c.scale, c.fixed_count)?,
        ))),
    }
}

/// Null reference draws, sorted once so replicate p-values are O(log N).
/// Quantile and p-value conventions match the `nulldist` operations.
struct SortedDraws {
    sorted: Vec<f64>,
}

impl SortedDraws {
    fn from_weights(weights: &[f64], mc_draws: usize, seed: u64) -> Result<SortedDraws> {
        if weights.is_empty() {
            return Err(Error::DegenerateNull);
        }
        let dist = WeightedChiSq::central(weights.to_vec())?;
        let mut sorted = wchisq_draws(&dist, mc_draws, seed)?;
        sorted.sort_by(f64::total_cmp);
        Ok(SortedDraws { sorted })
    }

    fn quantile(&self, level: f64) -> f64 {
        let n = self.sorted.len();
        let rank = ((level * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[rank - 1]
    }

    fn pvalue(&self, observed: f64) -> f64 {
        let below = self.sorted.partition_point(|d| *d < observed);
        (1 + self.sorted.len() - below) as f64 / (1 + self.sorted.len()) as f64
    }
}

/// Fixed critical values estimated once from a large clean-null sample.
///
/// The sign tests and T1/T2 compare their statistics against quantiles of
/// the weighted chi-square laws built from the calibration spectra; T3's
/// null is parameter-free given L, so its quantile is cached per L and looked
/// up with each replicate's own data-driven L.
struct OracleCalibration {
    ts: Option<SortedDraws>,
    tsr: Option<SortedDraws>,
    t1: Option<SortedDraws>,
    t2: Option<SortedDraws>,
    t3_by_l: Vec<Option<SortedDraws>>,
    alpha: f64,
}

fn build_oracle_calibration(config: &ExperimentConfig) -> Result<OracleCalibration> {
    let sampler = ProcessSampler::new(config.build_process_spec()?);
    let sample = sampler.sample(
        config.calibration_curves,
        mix(config.master_seed, ORACLE_SAMPLE_TAG),
    )?;
    let drop_tol = config.calib.drop_tol;
    let mc = config.calib.mc_draws;
    let want = |t: TestId| config.tests.contains(&t);

    let ts = if want(TestId::Ts) {
        let spec = spectrum(&pi1_hat(&sample)?, drop_tol)?;
        Some(SortedDraws::from_weights(
            spec.eigenvalues(),
            mc,
            mix(config.master_seed, ORACLE_CRIT_TAG),
        )?)
    } else {
        None
    };
    let tsr = if want(TestId::Tsr) {
        let spec = spectrum(&pi2_hat(&sample)?, drop_tol)?;
        Some(SortedDraws::from_weights(
            spec.eigenvalues(),
            mc,
            mix(config.master_seed, ORACLE_CRIT_TAG + 1),
        )?)
    } else {
        None
    };
    let sigma_spec = if want(TestId::T1) || want(TestId::T2) {
        Some(spectrum(&sigma_hat(&sample)?, drop_tol)?)
    } else {
        None
    };
    let t1 = match (&sigma_spec, want(TestId::T1)) {
        (Some(spec), true) => Some(SortedDraws::from_weights(
            spec.eigenvalues(),
            mc,
            mix(config.master_seed, ORACLE_CRIT_TAG + 2),
        )?),
        _ => None,
    };
    let t2 = match (&sigma_spec, want(TestId::T2)) {
        (Some(spec), true) => {
            let mean_config = config.mean_config.to_mean_config(config.alpha)?;
            let l_cal = match mean_config.l_override {
                Some(l) if l <= spec.len() => l,
                Some(l) => {
                    return Err(Error::SpectrumExhausted {
                        requested: l,
                        available: spec.len(),
                    })
                }
                None => choose_l(spec, mean_config.variance_threshold)?,
            };
            Some(SortedDraws::from_weights(
                &spec.eigenvalues()[..l_cal],
                mc,
                mix(config.master_seed, ORACLE_CRIT_TAG + 3),
            )?)
        }
        _ => None,
    };
    // chi-square(L) quantiles for every L a replicate can select.
    let t3_by_l = if want(TestId::T3) {
        let l_max = (config.n - 1).min(config.grid.m).max(1);
        let mut v: Vec<Option<SortedDraws>> = vec![None];
        for l in 1..=l_max {
            v.push(Some(SortedDraws::from_weights(
                &vec![1.0; l],
                mc,
                mix(config.master_seed, ORACLE_CRIT_TAG + 10 + l as u64),
            )?));
        }
        v
    } else {
        vec![None]
    };

    Ok(OracleCalibration {
        ts,
        tsr,
        t1,
        t2,
        t3_by_l,
        alpha: config.alpha,
    })
}

impl OracleCalibration {
    /// Statistic of `test` on `sample`, judged against the fixed null.
    fn outcome(
        &self,
        test: TestId,
        sample: &PairedDiffSample,
        mean_config: &MeanTestConfig,
        drop_tol: f64,
        own_sigma: &mut Option<(Spectrum, usize)>,
    ) -> Result<(bool, f64)> {
        let n_f = sample.n() as f64;
        let (statistic, draws) = match test {
            TestId::Ts => {
                let stat = t_s(sample);
                (n_f * stat.stat_norm().powi(2), self.ts.as_ref())
            }
            TestId::Tsr => {
                let stat = t_sr(sample)?;
                (n_f * stat.stat_norm().powi(2), self.tsr.as_ref())
            }
            TestId::T1 => (n_f * t1(sample), self.t1.as_ref()),
            TestId::T2 | TestId::T3 => {
                if own_sigma.is_none() {
                    let spec = spectrum(&sigma_hat(sample)?, drop_tol)?;
                    if spec.is_empty() {
                        return Err(Error::DegenerateNull);
                    }
                    let l = match mean_config.l_override {
                        Some(l) => {
                            if l > spec.len() {
                                return Err(Error::SpectrumExhausted {
                                    requested: l,
                                    available: spec.len(),
                                });
                            }
                            l
                        }
                        None => choose_l(&spec, mean_config.variance_threshold)?,
                    };
                    *own_sigma = Some((spec, l));
                }
                let (spec, l) = own_sigma.as_ref().expect("just filled");
                if test == TestId::T2 {
                    (n_f * t2(sample, spec, *l)?, self.t2.as_ref())
                } else {
                    (
                        n_f * t3(sample, spec, *l)?,
                        self.t3_by_l.get(*l).and_then(|d| d.as_ref()),
                    )
                }
            }
        };
        let draws = draws.ok_or(Error::DegenerateNull)?;
        let crit = draws.quantile(1.0 - self.alpha);
        Ok((statistic > crit, draws.pvalue(statistic)))
    }
}

struct TestAgg {
    rate: f64,
    se: f64,
    mean_pvalue: f64,
}

/// Rejection rates of the requested tests over `replicates` fresh samples,
/// optionally shifted. Deterministic in (sampler config, group_seed).
fn rejection_rates(
    sampler: &AnySampler,
    shift: Option<&Curve>,
    config: &ExperimentConfig,
    oracle: Option<&OracleCalibration>,
    group_seed: u64,
) -> Result<Vec<TestAgg>> {
    let mean_config = config.mean_config.to_mean_config(config.alpha)?;
    let outcomes: Vec<Result<Vec<(bool, f64)>>> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = mix(group_seed, rep);
            let sample = sampler.sample_shifted(config.n, mix(rep_seed, DATA_TAG), shift)?;
            match oracle {
                Some(oc) => {
                    let mut own_sigma = None;
                    config
                        .tests
                        .iter()
                        .map(|test| {
                            oc.outcome(
                                *test,
                                &sample,
                                &mean_config,
                                config.calib.drop_tol,
                                &mut own_sigma,
                            )
                        })
                        .collect()
                }
                None => config
                    .tests
                    .iter()
                    .enumerate()
                    .map(|(ti, test)| {
                        let calib = config
                            .calib
                            .to_calibration(mix(rep_seed, TEST_TAG + ti as u64));
                        let report = run_test(*test, &sample, config.alpha, &mean_config, &calib)?;
                        Ok((report.reject, report.p_value))
                    })
                    .collect(),
            }
        })
        .collect();

    let r = config.replicates as f64;
    let mut rejects = vec![0usize; config.tests.len()];
    let mut psums = vec![0.0; config.tests.len()];
    for rep in outcomes {
        for (ti, (reject, p)) in rep?.into_iter().enumerate() {
            if reject {
                rejects[ti] += 1;
            }
            psums[ti] += p;
        }
    }
    Ok(rejects
        .into_iter()
        .zip(psums)
        .map(|(k, psum)| {
            let rate = k as f64 / r;
            TestAgg {
                rate,
                se: (rate * (1.0 - rate) / r).sqrt(),
                mean_pvalue: psum / r,
            }
        })
        .collect())
}

fn maybe_oracle(config: &ExperimentConfig) -> Result<Option<OracleCalibration>> {
    match config.calibration_mode {
        CalibrationMode::OracleNull => Ok(Some(build_oracle_calibration(config)?)),
        CalibrationMode::PerReplicate => Ok(None),
    }
}

/// Empirical sizes under the (possibly contaminated) null.
pub fn run_null_size(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let sampler = build_sampler(config)?;
    let oracle = maybe_oracle(config)?;
    let aggs = rejection_rates(
        &sampler,
        None,
        config,
        oracle.as_ref(),
        mix(config.master_seed, SIZE_GROUP_TAG),
    )?;
    let epsilon = config.contamination.map(|c| c.epsilon);
    let cells = config
        .tests
        .iter()
        .zip(aggs)
        .map(|(test, agg)| CellResult {
            test: *test,
            metric: Metric::Size,
            epsilon,
            family: None,
            c: None,
            rate: agg.rate,
            se: agg.se,
            mean_pvalue: Some(agg.mean_pvalue),
            replicates: config.replicates,
            residual_shift: None,
        })
        .collect();
    Ok(ExperimentResult {
        config: config.clone(),
        cells,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Finite-sample rejection rates over the configured shift grid.
pub fn run_power_curves(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let sampler = build_sampler(config)?;
    let oracle = maybe_oracle(config)?;
    let grid = config.build_grid()?;
    let mut cells = Vec::new();
    for (pi, point) in config.shift_grid.iter().enumerate() {
        let shift = make_shift(&point.to_spec()?, &grid)?;
        let group_seed = mix(config.master_seed, CURVE_GROUP_TAG + pi as u64);
        let aggs = rejection_rates(&sampler, Some(&shift), config, oracle.as_ref(), group_seed)?;
        let metric = if point.c == 0.0 {
            Metric::Size
        } else {
            Metric::Power
        };
        for (test, agg) in config.tests.iter().zip(aggs) {
            cells.push(CellResult {
                test: *test,
                metric,
                epsilon: config.contamination.map(|c| c.epsilon),
                family: Some(family_label(point)),
                c: Some(point.c),
                rate: agg.rate,
                se: agg.se,
                mean_pvalue: Some(agg.mean_pvalue),
                replicates: config.replicates,
                residual_shift: None,
            });
        }
    }
    Ok(ExperimentResult {
        config: config.clone(),
        cells,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn family_label(point: &ShiftPoint) -> String {
    point
        .to_spec()
        .map(|s| s.family.label().to_string())
        .unwrap_or_default()
}

/// Sizes across contamination levels for every requested test, and powers at
/// the configured shift for the tests whose size survives contamination.
pub fn run_robustness(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let opts = config.robustness.clone().unwrap_or_default();
    let grid = config.build_grid()?;
    let power_shift = make_shift(&opts.power_shift.to_spec()?, &grid)?;
    let power_tests: Vec<TestId> = config
        .tests
        .iter()
        .copied()
        .filter(|t| matches!(t, TestId::Ts | TestId::Tsr | TestId::T3))
        .collect();

    // One clean-null calibration serves every contamination level.
    let oracle = maybe_oracle(config)?;

    let mut cells = Vec::new();
    for (ei, &eps) in opts.epsilons.iter().enumerate() {
        let sampler = AnySampler::Contaminated(ContaminatedSampler::new(
            config.build_contamination_spec(eps, opts.contaminant_scale, opts.fixed_count)?,
        ));

        let size_seed = mix(config.master_seed, SIZE_GROUP_TAG + ei as u64);
        let aggs = rejection_rates(&sampler, None, config, oracle.as_ref(), size_seed)?;
        for (test, agg) in config.tests.iter().zip(aggs) {
            cells.push(CellResult {
                test: *test,
                metric: Metric::Size,
                epsilon: Some(eps),
                family: None,
                c: None,
                rate: agg.rate,
                se: agg.se,
                mean_pvalue: Some(agg.mean_pvalue),
                replicates: config.replicates,
                residual_shift: None,
            });
        }

        if power_tests.is_empty() {
            continue;
        }
        let mut power_config = config.clone();
        power_config.tests = power_tests.clone();
        let power_seed = mix(config.master_seed, POWER_GROUP_TAG + ei as u64);
        let aggs = rejection_rates(
            &sampler,
            Some(&power_shift),
            &power_config,
            oracle.as_ref(),
            power_seed,
        )?;
        for (test, agg) in power_tests.iter().zip(aggs) {
            cells.push(CellResult {
                test: *test,
                metric: Metric::Power,
                epsilon: Some(eps),
                family: Some(family_label(&opts.power_shift)),
                c: Some(opts.power_shift.c),
                rate: agg.rate,
                se: agg.se,
                mean_pvalue: Some(agg.mean_pvalue),
                replicates: config.replicates,
                residual_shift: None,
            });
        }
    }
    Ok(ExperimentResult {
        config: config.clone(),
        cells,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Drift decomposition of one test's Gaussian limit: projections of the
/// drift onto the retained eigenfunctions plus the leftover mass.
struct DriftParts {
    betas_unit: Vec<f64>,
    residual_unit: f64,
}

fn drift_parts(spec: &Spectrum, drift_unit: &Curve) -> Result<DriftParts> {
    let mut betas_unit = Vec::with_capacity(spec.len());
    let mut mass = 0.0;
    for psi in spec.eigenfunctions() {
        let b = drift_unit.inner(psi)?;
        mass += b * b;
        betas_unit.push(b);
    }
    let residual_unit = (drift_unit.norm2().powi(2) - mass).max(0.0);
    Ok(DriftParts {
        betas_unit,
        residual_unit,
    })
}

/// Asymptotic powers over the shift grid, calibrated once on a large null
/// sample (drifts and spectra are estimated from it; each grid point then
/// costs only its noncentral draws, using the linearity of the drift in eta).
pub fn run_asymp_power(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let sampler = ProcessSampler::new(config.build_process_spec()?);
    let sample = sampler.sample(
        config.calibration_curves,
        mix(config.master_seed, ASYMP_SAMPLE_TAG),
    )?;
    let grid = sample.grid().clone();
    let drop_tol = config.calib.drop_tol;
    let mean_config = config.mean_config.to_mean_config(config.alpha)?;

    let want = |t: TestId| config.tests.contains(&t);
    let pi1_spec = if want(TestId::Ts) {
        Some(spectrum(&pi1_hat(&sample)?, drop_tol)?)
    } else {
        None
    };
    let pi2_spec = if want(TestId::Tsr) {
        Some(spectrum(&pi2_hat(&sample)?, drop_tol)?)
    } else {
        None
    };
    let sigma_spec = if want(TestId::T1) || want(TestId::T2) || want(TestId::T3) {
        Some(spectrum(&sigma_hat(&sample)?, drop_tol)?)
    } else {
        None
    };
    let l = match &sigma_spec {
        Some(spec) => match mean_config.l_override {
            Some(l) if l <= spec.len() => Some(l),
            Some(l) => {
                return Err(Error::SpectrumExhausted {
                    requested: l,
                    available: spec.len(),
                })
            }
            None => Some(choose_l(spec, mean_config.variance_threshold)?),
        },
        None => None,
    };

    // Null weights and critical values, once per test.
    let weights_of = |test: TestId| -> Result<Vec<f64>> {
        let w = match test {
            TestId::Ts => pi1_spec.as_ref().expect("requested").eigenvalues().to_vec(),
            TestId::Tsr => pi2_spec.as_ref().expect("requested").eigenvalues().to_vec(),
            TestId::T1 => sigma_spec
                .as_ref()
                .expect("requested")
                .eigenvalues()
                .to_vec(),
            TestId::T2 => {
                let spec = sigma_spec.as_ref().expect("requested");
                spec.eigenvalues()[..l.expect("mean test")].to_vec()
            }
            TestId::T3 => vec![1.0; l.expect("mean test")],
        };
        if w.is_empty() {
            return Err(Error::DegenerateNull);
        }
        Ok(w)
    };
    let mut crits = Vec::new();
    for (ti, test) in config.tests.iter().enumerate() {
        let weights = weights_of(*test)?;
        let dist = WeightedChiSq::central(weights.clone())?;
        let draws = wchisq_draws(
            &dist,
            config.calib.mc_draws,
            mix(config.master_seed, ASYMP_CRIT_TAG + ti as u64),
        )?;
        crits.push((weights, quantile(&draws, 1.0 - config.alpha)?));
    }

    // Unit-shift drift decompositions per family (drifts are linear in eta).
    #[derive(Default)]
    struct FamilyParts {
        ts: Option<DriftParts>,
        tsr: Option<DriftParts>,
        sigma: Option<DriftParts>,
    }
    let mut families: Vec<(String, FamilyParts)> = Vec::new();
    for point in &config.shift_grid {
        let label = family_label(point);
        if families.iter().any(|(f, _)| *f == label) {
            continue;
        }
        let mut unit_point = *point;
        unit_point.c = 1.0;
        let eta_unit = make_shift(&unit_point.to_spec()?, &grid)?;
        let mut parts = FamilyParts::default();
        if let Some(spec) = &pi1_spec {
            parts.ts = Some(drift_parts(spec, &j1_hat(&sample, &eta_unit)?)?);
        }
        if let Some(spec) = &pi2_spec {
            parts.tsr = Some(drift_parts(spec, &j2_hat(&sample, &eta_unit)?)?);
        }
        if let Some(spec) = &sigma_spec {
            parts.sigma = Some(drift_parts(spec, &eta_unit)?);
        }
        families.push((label, parts));
    }

    let mut cells = Vec::new();
    for (pi, point) in config.shift_grid.iter().enumerate() {
        let label = family_label(point);
        let parts = &families
            .iter()
            .find(|(f, _)| *f == label)
            .expect("prepared")
            .1;
        for (ti, test) in config.tests.iter().enumerate() {
            let (weights, crit) = &crits[ti];
            // Scale the unit decomposition by c; noncentral deltas need the
            // effective betas (beta/sqrt(lambda) for the standardized T3).
            let (base, lambdas_for_delta): (&DriftParts, Option<&[f64]>) = match test {
                TestId::Ts => (parts.ts.as_ref().expect("requested"), None),
                TestId::Tsr => (parts.tsr.as_ref().expect("requested"), None),
                TestId::T1 => (parts.sigma.as_ref().expect("requested"), None),
                TestId::T2 => (parts.sigma.as_ref().expect("requested"), None),
                TestId::T3 => (
                    parts.sigma.as_ref().expect("requested"),
                    Some(sigma_spec.as_ref().expect("requested").eigenvalues()),
                ),
            };
            let keep = weights.len();
            let mut betas: Vec<f64> = base.betas_unit.iter().map(|b| point.c * b).collect();
            betas.truncate(keep);
            if let Some(lambdas) = lambdas_for_delta {
                for (b, lam) in betas.iter_mut().zip(lambdas) {
                    *b /= lam.sqrt();
                }
            }
            // T2/T3 discard components beyond L; only T1 and the sign tests
            // carry the out-of-eigenspace drift as a deterministic shift.
            let residual = match test {
                TestId::T2 | TestId::T3 => 0.0,
                _ => point.c * point.c * base.residual_unit,
            };
            let alt = WeightedChiSq::from_spectrum_shift(weights, &betas)?;
            let seed = mix(config.master_seed, ASYMP_POINT_TAG + (pi * 8 + ti) as u64);
            let power = power_estimate(&alt, (crit - residual).max(0.0), config.replicates, seed)?;
            cells.push(CellResult {
                test: *test,
                metric: if point.c == 0.0 {
                    Metric::Size
                } else {
                    Metric::Power
                },
                epsilon: None,
                family: Some(label.clone()),
                c: Some(point.c),
                rate: power,
                se: (power * (1.0 - power) / config.replicates as f64).sqrt(),
                mean_pvalue: None,
                replicates: config.replicates,
                residual_shift: Some(residual),
            });
        }
    }
    Ok(ExperimentResult {
        config: config.clone(),
        cells,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Reports for one dataset (the `test` CLI path).
#[derive(Debug, Clone, Serialize)]
pub struct SingleRunResult {
    pub config: ExperimentConfig,
    pub reports: Vec<TestReport>,
}

pub fn run_single(config: &ExperimentConfig, sample: &PairedDiffSample) -> Result<SingleRunResult> {
    config.validate()?;
    let mean_config = config.mean_config.to_mean_config(config.alpha)?;
    let reports = config
        .tests
        .iter()
        .enumerate()
        .map(|(ti, test)| {
            let calib = config
                .calib
                .to_calibration(mix(config.master_seed, SINGLE_TAG + ti as u64));
            run_test(*test, sample, config.alpha, &mean_config, &calib)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SingleRunResult {
        config: config.clone(),
        reports,
    })
}

/// Calibration metadata without a test decision: estimated eigenvalues and
/// the simulated critical value per requested test.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub test: TestId,
    pub eigenvalues: Vec<f64>,
    pub l_used: Option<usize>,
    pub critical_value: f64,
    pub alpha: f64,
    pub mc_draws: usize,
    pub seed: u64,
}

pub fn calibrate_only(
    config: &ExperimentConfig,
    sample: &PairedDiffSample,
) -> Result<Vec<CalibrationReport>> {
    config.validate()?;
    let mean_config = config.mean_config.to_mean_config(config.alpha)?;
    let mut out = Vec::new();
    for (ti, test) in config.tests.iter().enumerate() {
        let seed = mix(config.master_seed, SINGLE_TAG + ti as u64);
        let calib = config.calib.to_calibration(seed);
        let report = run_test(*test, sample, config.alpha, &mean_config, &calib)?;
        out.push(CalibrationReport {
            test: *test,
            eigenvalues: report.eigenvalues_used,
            l_used: report.l_used,
            critical_value: report.critical_value,
            alpha: config.alpha,
            mc_draws: calib.mc_draws,
            seed,
        });
    }
    Ok(out)
}

/// Dispatch an experiment scenario (everything except single-dataset runs,
/// which need data).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    match config.scenario {
        Scenario::NullSize => run_null_size(config),
        Scenario::PowerCurve => run_power_curves(config),
        Scenario::Robustness => run_robustness(config),
        Scenario::AsymptoticPower => run_asymp_power(config),
        Scenario::SingleDataset => Err(Error::invalid(
            "single_dataset scenario needs data; use run_single",
        )),
    }
}
