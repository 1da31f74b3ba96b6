//! Mean-based competitor tests T1, T2, T3.
//!
//! T1 is the squared norm of the mean difference curve; T2 and T3 project the
//! mean onto the leading eigenfunctions of the sample covariance operator,
//! without and with standardization by the eigenvalues. The projection
//! dimension L comes from the cumulative variance rule unless overridden.
//!
//! Null calibration follows the weighted chi-square limits of `n T_j`: all
//! eigenvalues for T1, the top L for T2, and L unit weights (a central
//! chi-square with L degrees of freedom) for T3.

use crate::error::{Error, Result};
use crate::fspace::PairedDiffSample;
use crate::nulldist::CalibrationConfig;
use crate::signstats::{report_from_weights, TestId, TestReport};
use crate::specops::{sigma_hat, spectrum, Spectrum};

/// Settings for the projection tests.
#[derive(Debug, Clone)]
pub struct MeanTestConfig {
    /// Fraction of total variance the leading eigenvalues must capture.
    pub variance_threshold: f64,
    /// Fixed L, bypassing the cumulative variance rule.
    pub l_override: Option<usize>,
    pub alpha: f64,
}

impl MeanTestConfig {
    pub fn new(variance_threshold: f64, l_override: Option<usize>, alpha: f64) -> Result<Self> {
        let cfg = MeanTestConfig {
            variance_threshold,
            l_override,
            alpha,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance_threshold > 0.0 && self.variance_threshold < 1.0) {
            return Err(Error::invalid(format!(
                "variance threshold must be in (0,1), got {}",
                self.variance_threshold
            )));
        }
        if self.l_override == Some(0) {
            return Err(Error::invalid("L override must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

impl Default for MeanTestConfig {
    fn default() -> Self {
        MeanTestConfig {
            variance_threshold: 0.85,
            l_override: None,
            alpha: 0.05,
        }
    }
}

/// `T1 = ||W-bar||^2`.
pub fn t1(sample: &PairedDiffSample) -> f64 {
    sample.mean_curve().norm2().powi(2)
}

/// Smallest L whose leading eigenvalues capture at least `threshold` of the
/// total variance (boundary inclusive).
pub fn choose_l(spec: &Spectrum, threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!(
            "threshold must be in (0,1), got {threshold}"
        )));
    }
    let total = spec.total_variance();
    if spec.is_empty() || total <= 0.0 {
        return Err(Error::DegenerateNull);
    }
    let mut cum = 0.0;
    for (k, lambda) in spec.eigenvalues().iter().enumerate() {
        cum += lambda;
        if cum / total >= threshold {
            return Ok(k + 1);
        }
    }
    Ok(spec.len())
}

/// `T2 = sum_{k<=L} <W-bar, psi_k>^2`.
pub fn t2(sample: &PairedDiffSample, spec: &Spectrum, l: usize) -> Result<f64> {
    check_l(spec, l)?;
    let mean = sample.mean_curve();
    let mut total = 0.0;
    for psi in &spec.eigenfunctions()[..l] {
        let proj = mean.inner(psi)?;
        total += proj * proj;
    }
    Ok(total)
}

/// `T3 = sum_{k<=L} <W-bar, psi_k>^2 / lambda_k`.
pub fn t3(sample: &PairedDiffSample, spec: &Spectrum, l: usize) -> Result<f64> {
    check_l(spec, l)?;
    let mean = sample.mean_curve();
    let mut total = 0.0;
    for (k, (lambda, psi)) in spec.eigenvalues()[..l]
        .iter()
        .zip(&spec.eigenfunctions()[..l])
        .enumerate()
    {
        if *lambda <= 0.0 {
            return Err(Error::StandardizationUndefined { index: k });
        }
        let proj = mean.inner(psi)?;
        total += proj * proj / lambda;
    }
    Ok(total)
}

fn check_l(spec: &Spectrum, l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::invalid("projection dimension L must be at least 1"));
    }
    if l > spec.len() {
        return Err(Error::SpectrumExhausted {
            requested: l,
            available: spec.len(),
        });
    }
    Ok(())
}

/// Calibrated mean-based test: statistic `n * T_kind` against its weighted
/// chi-square null.
pub fn mean_test(
    kind: TestId,
    sample: &PairedDiffSample,
    config: &MeanTestConfig,
    calib: &CalibrationConfig,
) -> Result<TestReport> {
    config.validate()?;
    let n = sample.n();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let spec = spectrum(&sigma_hat(sample)?, calib.drop_tol)?;
    if spec.is_empty() {
        return Err(Error::DegenerateNull);
    }
    let l = match config.l_override {
        Some(l) => {
            check_l(&spec, l)?;
            l
        }
        None => choose_l(&spec, config.variance_threshold)?,
    };

    let n_f = n as f64;
    let (statistic, weights, l_used) = match kind {
        TestId::T1 => (n_f * t1(sample), spec.eigenvalues().to_vec(), None),
        TestId::T2 => (
            n_f * t2(sample, &spec, l)?,
            spec.eigenvalues()[..l].to_vec(),
            Some(l),
        ),
        TestId::T3 => (n_f * t3(sample, &spec, l)?, vec![1.0; l], Some(l)),
        other => {
            return Err(Error::invalid(format!(
                "mean_test handles T1/T2/T3, got {}",
                other.label()
            )))
        }
    };
    report_from_weights(kind, statistic, weights, l_used, config.alpha, calib)
}
