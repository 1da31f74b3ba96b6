//! Weighted chi-square reference distributions.
//!
//! Squared norms of Gaussian elements in a Hilbert space are distributed as
//! `sum_k lambda_k chi2_1(delta_k)` where the lambda_k are covariance
//! eigenvalues and delta_k the (per-component) noncentralities. Critical
//! values and p-values are obtained by seeded Monte Carlo, which handles the
//! central and noncentral cases uniformly.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seeding::stream_rng;

/// Stream id for reference draws: keeps them disjoint from data streams.
const DRAW_STREAM: u64 = 0xd12a_5eed_0000_0001;

/// `sum_k lambda_k chi2_1(delta_k)`, all lambda_k > 0, delta_k >= 0.
#[derive(Debug, Clone)]
pub struct WeightedChiSq {
    weights: Vec<f64>,
    noncentrality: Vec<f64>,
}

impl WeightedChiSq {
    /// Central law: all noncentralities zero.
    pub fn central(weights: Vec<f64>) -> Result<WeightedChiSq> {
        check_weights(&weights)?;
        let noncentrality = vec![0.0; weights.len()];
        Ok(WeightedChiSq {
            weights,
            noncentrality,
        })
    }

    /// Noncentral law with explicit delta_k = beta_k^2 / lambda_k.
    pub fn noncentral(weights: Vec<f64>, noncentrality: Vec<f64>) -> Result<WeightedChiSq> {
        check_weights(&weights)?;
        if noncentrality.len() != weights.len() {
            return Err(Error::invalid("noncentrality length must match weights"));
        }
        if noncentrality.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::invalid(
                "noncentralities must be nonnegative and finite",
            ));
        }
        Ok(WeightedChiSq {
            weights,
            noncentrality,
        })
    }

    /// Law of `||G(shift, C)||^2` restricted to the retained eigenspace:
    /// weights are eigenvalues, delta_k = beta_k^2 / lambda_k for the shift
    /// coefficients beta_k. Rejects a beta on a zero eigenvalue.
    pub fn from_spectrum_shift(lambdas: &[f64], betas: &[f64]) -> Result<WeightedChiSq> {
        if lambdas.len() != betas.len() {
            return Err(Error::invalid("betas length must match eigenvalues"));
        }
        for (l, b) in lambdas.iter().zip(betas) {
            if *l <= 0.0 && *b != 0.0 {
                return Err(Error::ShiftInKernel);
            }
        }
        let deltas = lambdas.iter().zip(betas).map(|(l, b)| b * b / l).collect();
        WeightedChiSq::noncentral(lambdas.to_vec(), deltas)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn noncentrality(&self) -> &[f64] {
        &self.noncentrality
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.noncentrality)
            .map(|(l, d)| l * (1.0 + d))
            .sum()
    }

    pub fn variance(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.noncentrality)
            .map(|(l, d)| 2.0 * l * l * (1.0 + 2.0 * d))
            .sum()
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::invalid("weights must be positive and finite"));
    }
    Ok(())
}

/// Calibration settings shared by all tests.
#[derive(Debug, Clone)]
pub struct CalibrationConfig {
    pub mc_draws: usize,
    pub seed: u64,
    pub drop_tol: f64,
}

impl CalibrationConfig {
    pub fn new(mc_draws: usize, seed: u64, drop_tol: f64) -> Result<CalibrationConfig> {
        let cfg = CalibrationConfig {
            mc_draws,
            seed,
            drop_tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc_draws < 1000 {
            return Err(Error::invalid(format!(
                "mc_draws must be at least 1000, got {}",
                self.mc_draws
            )));
        }
        if !(self.drop_tol.is_finite() && self.drop_tol >= 0.0) {
            return Err(Error::invalid("drop_tol must be nonnegative"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> CalibrationConfig {
        CalibrationConfig {
            seed,
            ..self.clone()
        }
    }
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            mc_draws: 100_000,
            seed: 0,
            drop_tol: 1e-12,
        }
    }
}

/// `mc_draws` i.i.d. realizations of `sum_k lambda_k (Z_k + sqrt(delta_k))^2`.
///
/// The normal stream depends only on `(seed, mc_draws index, k)`, so scaling
/// all weights rescales every draw exactly.
pub fn wchisq_draws(dist: &WeightedChiSq, mc_draws: usize, seed: u64) -> Result<Vec<f64>> {
    if dist.weights.is_empty() {
        return Err(Error::DegenerateNull);
    }
    let mut rng = stream_rng(seed, DRAW_STREAM);
    let sqrt_delta: Vec<f64> = dist.noncentrality.iter().map(|d| d.sqrt()).collect();
    let mut draws = Vec::with_capacity(mc_draws);
    for _ in 0..mc_draws {
        let mut total = 0.0;
        for (l, sd) in dist.weights.iter().zip(&sqrt_delta) {
            let z: f64 = rng.sample(StandardNormal);
            let shifted = z + sd;
            total += l * shifted * shifted;
        }
        draws.push(total);
    }
    Ok(draws)
}

/// Order-statistic quantile: the `ceil(level * N)`-th smallest draw.
pub fn quantile(draws: &[f64], level: f64) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::invalid("quantile of empty draws"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "quantile level must be in (0,1), got {level}"
        )));
    }
    let n = draws.len();
    let rank = ((level * n as f64).ceil() as usize).clamp(1, n);
    let mut work = draws.to_vec();
    let (_, kth, _) = work.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*kth)
}

/// Monte Carlo p-value `(1 + #{draw >= observed}) / (1 + N)`; never zero.
pub fn pvalue(draws: &[f64], observed: f64) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::invalid("p-value from empty draws"));
    }
    let count = draws.iter().filter(|d| **d >= observed).count();
    Ok((1 + count) as f64 / (1 + draws.len()) as f64)
}

/// Fraction of draws from `dist_alt` exceeding the critical value.
pub fn power_estimate(
    dist_alt: &WeightedChiSq,
    crit: f64,
    mc_draws: usize,
    seed: u64,
) -> Result<f64> {
    if !(crit.is_finite() && crit >= 0.0) {
        return Err(Error::invalid("critical value must be nonnegative"));
    }
    let draws = wchisq_draws(dist_alt, mc_draws, seed)?;
    Ok(draws.iter().filter(|d| **d > crit).count() as f64 / mc_draws as f64)
}
