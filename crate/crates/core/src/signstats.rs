//! Spatial signs and the paired-sample sign and signed-rank tests.
//!
//! The spatial sign of a nonzero curve is its direction `x / ||x||` (zero
//! maps to zero). The two test statistics are
//!
//! ```text
//! T_S  = n^-1 sum_i S_{W_i}
//! T_SR = 2 / (n(n-1)) * sum_{i<j} S_{W_i + W_j}
//! ```
//!
//! Both tests reject for large `||sqrt(n) T||`; the null law of the squared
//! norm is a weighted chi-square whose weights are the eigenvalues of the
//! estimated covariance operator of the summands (`pi1_hat` / `pi2_hat`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fspace::{accumulate, Curve, PairedDiffSample};
use crate::nulldist::{pvalue, quantile, wchisq_draws, CalibrationConfig, WeightedChiSq};
use crate::specops::{pi1_hat, pi2_hat, spectrum};

/// Which statistic a [`SignStatistic`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignKind {
    Sign,
    SignedRank,
}

/// A sign-type statistic: the averaged direction curve and its norm.
///
/// The curve doubles as the location estimate (nu-hat for the sign statistic,
/// theta-hat for the signed-rank statistic). Its norm never exceeds 1 because
/// every summand has norm at most 1.
#[derive(Debug, Clone)]
pub struct SignStatistic {
    curve: Curve,
    stat_norm: f64,
    n: usize,
    kind: SignKind,
}

impl SignStatistic {
    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn stat_norm(&self) -> f64 {
        self.stat_norm
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> SignKind {
        self.kind
    }
}

/// Spatial sign `f / ||f||_2`, with the zero curve mapped to itself.
///
/// A curve counts as zero only when its norm is exactly zero; there is no
/// epsilon threshold.
pub fn spatial_sign(f: &Curve) -> Curve {
    let nrm = f.norm2();
    if nrm == 0.0 {
        Curve::zero(f.grid().clone())
    } else {
        f.scale(1.0 / nrm)
    }
}

/// Lp sign representer `sign(f(t)) |f(t)|^(p-1) / ||f||_p^(p-1)` for p > 1.
///
/// The result has unit dual norm: `||result||_q = 1` with `q = p/(p-1)`.
/// Reduces to [`spatial_sign`] at p = 2.
pub fn lp_spatial_sign(f: &Curve, p: f64) -> Result<Curve> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::invalid(format!("Lp sign needs p > 1, got {p}")));
    }
    let nrm = f.norm(p)?;
    if nrm == 0.0 {
        return Ok(Curve::zero(f.grid().clone()));
    }
    let scale = nrm.powf(p - 1.0);
    let values = f
        .values()
        .iter()
        .map(|&v| v.signum() * v.abs().powf(p - 1.0) / scale)
        .collect();
    Curve::new(f.grid().clone(), values)
}

/// Paired-sample sign statistic: the average of the spatial signs.
pub fn t_s(sample: &PairedDiffSample) -> SignStatistic {
    let n = sample.n();
    let mut acc = vec![0.0; sample.grid().len()];
    for w in sample.diffs() {
        accumulate(&mut acc, 1.0, spatial_sign(w).values());
    }
    let n_f = n as f64;
    for a in &mut acc {
        *a /= n_f;
    }
    let curve = Curve::new(sample.grid().clone(), acc).expect("average of valid curves");
    let stat_norm = curve.norm2();
    SignStatistic {
        curve,
        stat_norm,
        n,
        kind: SignKind::Sign,
    }
}

/// Paired-sample signed-rank statistic: the U-statistic average of spatial
/// signs of the pair sums, over unordered pairs i < j. Costs O(n^2 m).
///
/// An exactly zero pair sum contributes a zero curve, extending the zero-sign
/// convention to pairs.
pub fn t_sr(sample: &PairedDiffSample) -> Result<SignStatistic> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let m = sample.grid().len();
    let weights = sample.grid().weights();
    let diffs = sample.diffs();
    let mut acc = vec![0.0; m];
    let mut pair_sum = vec![0.0; m];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut norm_sq = 0.0;
            for (k, (a, b)) in diffs[i].values().iter().zip(diffs[j].values()).enumerate() {
                let v = a + b;
                pair_sum[k] = v;
                norm_sq += weights[k] * v * v;
            }
            if norm_sq > 0.0 {
                accumulate(&mut acc, 1.0 / norm_sq.sqrt(), &pair_sum);
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    for a in &mut acc {
        *a /= pairs;
    }
    let curve = Curve::new(sample.grid().clone(), acc)?;
    let stat_norm = curve.norm2();
    Ok(SignStatistic {
        curve,
        stat_norm,
        n,
        kind: SignKind::SignedRank,
    })
}

/// Which test produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestId {
    Ts,
    Tsr,
    T1,
    T2,
    T3,
}

impl TestId {
    pub const ALL: [TestId; 5] = [TestId::Ts, TestId::Tsr, TestId::T1, TestId::T2, TestId::T3];

    pub fn label(&self) -> &'static str {
        match self {
            TestId::Ts => "TS",
            TestId::Tsr => "TSR",
            TestId::T1 => "T1",
            TestId::T2 => "T2",
            TestId::T3 => "T3",
        }
    }
}

/// Outcome of one calibrated test on one dataset.
///
/// `statistic` is on the squared scale `||sqrt(n) T||^2` (or `n T_j` for the
/// mean tests), matching the weighted chi-square null; `statistic_norm` is
/// its square root. The critical value is on the squared scale too, so
/// `reject == (statistic > critical_value)`, which agrees with
/// `p_value < alpha` up to Monte Carlo quantile ties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub test: TestId,
    pub statistic: f64,
    pub statistic_norm: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub eigenvalues_used: Vec<f64>,
    pub l_used: Option<usize>,
    pub mc_draws: usize,
    pub seed: u64,
}

/// Calibrate a squared-norm statistic against the central weighted
/// chi-square with the given weights.
pub(crate) fn report_from_weights(
    test: TestId,
    statistic: f64,
    weights: Vec<f64>,
    l_used: Option<usize>,
    alpha: f64,
    calib: &CalibrationConfig,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    calib.validate()?;
    if weights.is_empty() {
        return Err(Error::DegenerateNull);
    }
    let dist = WeightedChiSq::central(weights.clone())?;
    let draws = wchisq_draws(&dist, calib.mc_draws, calib.seed)?;
    let critical_value = quantile(&draws, 1.0 - alpha)?;
    let p_value = pvalue(&draws, statistic)?;
    Ok(TestReport {
        test,
        statistic,
        statistic_norm: statistic.sqrt(),
        critical_value,
        p_value,
        alpha,
        reject: statistic > critical_value,
        eigenvalues_used: weights,
        l_used,
        mc_draws: calib.mc_draws,
        seed: calib.seed,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    Ok(())
}

/// Sign-covariance operators are built from unit-norm summands, so their
/// trace is O(1) for any nondegenerate sample. A total eigenvalue mass at
/// rounding level means every summand pointed the same way (the estimator is
/// mathematically zero) and the null calibration is undefined.
const DEGENERATE_TRACE_TOL: f64 = 1e-12;

/// Spatial sign test: rejects when `||sqrt(n) T_S||` exceeds the simulated
/// `(1-alpha)` quantile of its estimated null law.
pub fn sign_test(
    sample: &PairedDiffSample,
    alpha: f64,
    calib: &CalibrationConfig,
) -> Result<TestReport> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let stat = t_s(sample);
    let statistic = n as f64 * stat.stat_norm * stat.stat_norm;
    let spec = spectrum(&pi1_hat(sample)?, calib.drop_tol)?;
    if spec.is_empty() || spec.total_variance() <= DEGENERATE_TRACE_TOL {
        return Err(Error::DegenerateNull);
    }
    report_from_weights(
        TestId::Ts,
        statistic,
        spec.eigenvalues().to_vec(),
        None,
        alpha,
        calib,
    )
}

/// Spatial signed-rank test: as [`sign_test`] with `T_SR` and `pi2_hat`.
pub fn signed_rank_test(
    sample: &PairedDiffSample,
    alpha: f64,
    calib: &CalibrationConfig,
) -> Result<TestReport> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let stat = t_sr(sample)?;
    let statistic = n as f64 * stat.stat_norm * stat.stat_norm;
    let spec = spectrum(&pi2_hat(sample)?, calib.drop_tol)?;
    if spec.is_empty() || spec.total_variance() <= DEGENERATE_TRACE_TOL {
        return Err(Error::DegenerateNull);
    }
    report_from_weights(
        TestId::Tsr,
        statistic,
        spec.eigenvalues().to_vec(),
        None,
        alpha,
        calib,
    )
}
