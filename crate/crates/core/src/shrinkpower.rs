//! Asymptotic power machinery under shrinking location shifts.
//!
//! Under shifts of size `n^(-1/2) eta`, `sqrt(n) T_S` and `sqrt(n) T_SR` have
//! Gaussian limits whose means are the sample-analog drift operators applied
//! to eta and whose covariances are `pi1_hat` / `pi2_hat`. The drifts are
//! averages of the Hessian of the norm,
//!
//! ```text
//! H_u(eta) = (eta - <S_u, eta> S_u) / ||u||
//! ```
//!
//! over the curves (sign statistic) or the pair sums with a chain-rule factor
//! of two (signed-rank statistic; defined operationally as the derivative at
//! zero of the empirical pair-sign map, which is the quantity the power
//! pipeline needs and the one verifiable by finite differences).
//!
//! Powers come from noncentral weighted chi-square draws: the drift is
//! decomposed in the estimated eigenbasis, each component contributing
//! noncentrality `b_k^2 / lambda_k`, and any drift mass outside the retained
//! eigenspace enters as a deterministic shift of the squared norm (reported
//! separately). The mean tests go the same way with the shift eta itself and
//! the covariance spectrum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fspace::{accumulate, axpby, same_grid, Curve, PairedDiffSample};
use crate::meantests::{choose_l, MeanTestConfig};
use crate::nulldist::{power_estimate, quantile, wchisq_draws, CalibrationConfig, WeightedChiSq};
use crate::procsim::{make_shift, ShiftSpec};
use crate::seeding::mix;
use crate::signstats::{spatial_sign, SignKind, TestId};
use crate::specops::{pi1_hat, pi2_hat, sigma_hat, spectrum, Spectrum};

const NULL_DRAW_TAG: u64 = 0xa17_0001;
const ALT_DRAW_TAG: u64 = 0xa17_0002;

/// One asymptotic power evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticPowerPoint {
    pub test: TestId,
    pub family: String,
    pub c: f64,
    pub power: f64,
    pub replicates: usize,
    /// Drift mass outside the retained eigenspace, added as a deterministic
    /// shift of the squared-norm statistic.
    pub residual_shift: f64,
}

/// Hessian of the norm at `u` applied to `eta` (the derivative of the sign
/// map along `eta`). Errors on `u = 0`, where the sign map is not smooth.
pub fn hessian_at(u: &Curve, eta: &Curve) -> Result<Curve> {
    if !same_grid(u.grid(), eta.grid()) {
        return Err(Error::GridMismatch);
    }
    let nrm = u.norm2();
    if nrm == 0.0 {
        return Err(Error::ZeroCurve(
            "Hessian undefined at the zero curve".into(),
        ));
    }
    let sign = spatial_sign(u);
    let coeff = sign.inner(eta)?;
    let projected = axpby(1.0, eta, -coeff, &sign)?;
    Ok(projected.scale(1.0 / nrm))
}

/// Sample-analog drift of the sign statistic: `(1/n) sum_i H_{W_i}(eta)`.
pub fn j1_hat(sample: &PairedDiffSample, eta: &Curve) -> Result<Curve> {
    if !same_grid(sample.grid(), eta.grid()) {
        return Err(Error::GridMismatch);
    }
    let n = sample.n();
    let mut acc = vec![0.0; sample.grid().len()];
    for (i, w) in sample.diffs().iter().enumerate() {
        let h = hessian_at(w, eta)
            .map_err(|_| Error::ZeroCurve(format!("curve {i} is zero; sign drift undefined")))?;
        accumulate(&mut acc, 1.0, h.values());
    }
    let n_f = n as f64;
    for a in &mut acc {
        *a /= n_f;
    }
    Curve::new(sample.grid().clone(), acc)
}

/// Sample-analog drift of the signed-rank statistic:
/// `(4/(n(n-1))) sum_{i<j} H_{W_i + W_j}(eta)`, the derivative at zero of
/// `t -> (2/(n(n-1))) sum_{i<j} S_{2 t eta + W_i + W_j}`.
pub fn j2_hat(sample: &PairedDiffSample, eta: &Curve) -> Result<Curve> {
    if !same_grid(sample.grid(), eta.grid()) {
        return Err(Error::GridMismatch);
    }
    let n = sample.n();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let m = sample.grid().len();
    let weights = sample.grid().weights();
    let eta_vals = eta.values();
    let diffs = sample.diffs();
    let mut acc = vec![0.0; m];
    let mut pair_sum = vec![0.0; m];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut norm_sq = 0.0;
            let mut inner_ue = 0.0;
            for (k, (a, b)) in diffs[i].values().iter().zip(diffs[j].values()).enumerate() {
                let v = a + b;
                pair_sum[k] = v;
                norm_sq += weights[k] * v * v;
                inner_ue += weights[k] * v * eta_vals[k];
            }
            if norm_sq == 0.0 {
                return Err(Error::ZeroCurve(format!(
                    "pair sum ({i},{j}) is zero; drift undefined"
                )));
            }
            // H_u(eta) = eta/||u|| - <u,eta> u / ||u||^3, accumulated in place.
            let nrm = norm_sq.sqrt();
            let eta_coeff = 1.0 / nrm;
            let u_coeff = inner_ue / (norm_sq * nrm);
            for (a, (e, v)) in acc.iter_mut().zip(eta_vals.iter().zip(&pair_sum)) {
                *a += eta_coeff * e - u_coeff * v;
            }
        }
    }
    let scale = 4.0 / (n * (n - 1)) as f64;
    for a in &mut acc {
        *a *= scale;
    }
    Curve::new(sample.grid().clone(), acc)
}

/// Power of a squared-norm statistic whose limit is `||G(drift, C)||^2`,
/// given the estimated spectrum of C.
///
/// The critical value is the `(1-alpha)` quantile of the central law at
/// `calib.mc_draws` precision; the power fraction uses `draws` noncentral
/// realizations plus the deterministic residual shift.
pub(crate) fn power_from_drift(
    spec: &Spectrum,
    drift: &Curve,
    alpha: f64,
    calib: &CalibrationConfig,
    draws: usize,
) -> Result<(f64, f64)> {
    if spec.is_empty() {
        return Err(Error::DegenerateNull);
    }
    let lambdas = spec.eigenvalues().to_vec();
    let mut betas = Vec::with_capacity(lambdas.len());
    let mut projected_mass = 0.0;
    for psi in spec.eigenfunctions() {
        let b = drift.inner(psi)?;
        projected_mass += b * b;
        betas.push(b);
    }
    let residual = (drift.norm2().powi(2) - projected_mass).max(0.0);

    let null = WeightedChiSq::central(lambdas.clone())?;
    let null_draws = wchisq_draws(&null, calib.mc_draws, mix(calib.seed, NULL_DRAW_TAG))?;
    let crit = quantile(&null_draws, 1.0 - alpha)?;

    let alt = WeightedChiSq::from_spectrum_shift(&lambdas, &betas)?;
    // draw + residual > crit  <=>  draw > crit - residual
    let power = power_estimate(
        &alt,
        (crit - residual).max(0.0),
        draws,
        mix(calib.seed, ALT_DRAW_TAG),
    )?;
    Ok((power, residual))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    Ok(())
}

/// Asymptotic power of the sign or signed-rank test under the shrinking
/// shift `n^(-1/2) c eta`, calibrated on a large null sample.
pub fn asymp_power_signtests(
    kind: SignKind,
    null_sample: &PairedDiffSample,
    shift: &ShiftSpec,
    alpha: f64,
    calib: &CalibrationConfig,
    draws: usize,
) -> Result<AsymptoticPowerPoint> {
    check_alpha(alpha)?;
    calib.validate()?;
    let eta = make_shift(shift, null_sample.grid())?;
    let (op, drift, test) = match kind {
        SignKind::Sign => (
            pi1_hat(null_sample)?,
            j1_hat(null_sample, &eta)?,
            TestId::Ts,
        ),
        SignKind::SignedRank => (
            pi2_hat(null_sample)?,
            j2_hat(null_sample, &eta)?,
            TestId::Tsr,
        ),
    };
    let spec = spectrum(&op, calib.drop_tol)?;
    let (power, residual_shift) = power_from_drift(&spec, &drift, alpha, calib, draws)?;
    Ok(AsymptoticPowerPoint {
        test,
        family: shift.family.label().to_string(),
        c: shift.c,
        power,
        replicates: draws,
        residual_shift,
    })
}

/// Noncentral weighted chi-square law of a mean-based statistic under the
/// shrinking shift, together with the deterministic residual shift.
pub(crate) fn mean_limit_parts(
    kind: TestId,
    spec: &Spectrum,
    eta: &Curve,
    mean_config: &MeanTestConfig,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if spec.is_empty() {
        return Err(Error::DegenerateNull);
    }
    let mut betas = Vec::with_capacity(spec.len());
    let mut projected_mass = 0.0;
    for psi in spec.eigenfunctions() {
        let b = eta.inner(psi)?;
        projected_mass += b * b;
        betas.push(b);
    }
    let lambdas = spec.eigenvalues();

    match kind {
        TestId::T1 => {
            // nT1 keeps every component; mass outside the retained
            // eigenspace shows up as a deterministic shift of ||.||^2.
            let residual = (eta.norm2().powi(2) - projected_mass).max(0.0);
            Ok((lambdas.to_vec(), betas, residual))
        }
        TestId::T2 | TestId::T3 => {
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
                None => choose_l(spec, mean_config.variance_threshold)?,
            };
            if kind == TestId::T2 {
                Ok((lambdas[..l].to_vec(), betas[..l].to_vec(), 0.0))
            } else {
                // Standardized projections: unit weights, same deltas.
                let mut deltas_as_betas = Vec::with_capacity(l);
                for k in 0..l {
                    if lambdas[k] <= 0.0 {
                        return Err(Error::StandardizationUndefined { index: k });
                    }
                    // With unit weights, delta_k = beta_k^2/lambda_k means the
                    // effective beta is beta_k / sqrt(lambda_k).
                    deltas_as_betas.push(betas[k] / lambdas[k].sqrt());
                }
                Ok((vec![1.0; l], deltas_as_betas, 0.0))
            }
        }
        other => Err(Error::invalid(format!(
            "mean-test power handles T1/T2/T3, got {}",
            other.label()
        ))),
    }
}

/// Asymptotic power of a mean-based test under the shrinking shift.
pub fn asymp_power_meantests(
    kind: TestId,
    null_sample: &PairedDiffSample,
    shift: &ShiftSpec,
    alpha: f64,
    mean_config: &MeanTestConfig,
    calib: &CalibrationConfig,
    draws: usize,
) -> Result<AsymptoticPowerPoint> {
    check_alpha(alpha)?;
    calib.validate()?;
    mean_config.validate()?;
    let eta = make_shift(shift, null_sample.grid())?;
    let spec = spectrum(&sigma_hat(null_sample)?, calib.drop_tol)?;
    let (weights, betas, residual_shift) = mean_limit_parts(kind, &spec, &eta, mean_config)?;

    let null = WeightedChiSq::central(weights.clone())?;
    let null_draws = wchisq_draws(&null, calib.mc_draws, mix(calib.seed, NULL_DRAW_TAG))?;
    let crit = quantile(&null_draws, 1.0 - alpha)?;
    let alt = WeightedChiSq::from_spectrum_shift(&weights, &betas)?;
    let power = power_estimate(
        &alt,
        (crit - residual_shift).max(0.0),
        draws,
        mix(calib.seed, ALT_DRAW_TAG),
    )?;
    Ok(AsymptoticPowerPoint {
        test: kind,
        family: shift.family.label().to_string(),
        c: shift.c,
        power,
        replicates: draws,
        residual_shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fspace::Grid;
    use crate::procsim::{sample_process, ProcessKind, ProcessSpec, ShiftFamily};
    use rand::Rng;
    use std::sync::Arc;

    fn unit_grid(m: usize) -> Arc<Grid> {
        Grid::equispaced(0.0, 1.0, m).unwrap()
    }

    fn sbm_sample(n: usize, m: usize, seed: u64) -> PairedDiffSample {
        let spec = ProcessSpec::with_default_terms(ProcessKind::SBm, unit_grid(m)).unwrap();
        sample_process(&spec, n, seed).unwrap()
    }

    fn random_curve(grid: &Arc<Grid>, seed: u64) -> Curve {
        let mut rng = crate::seeding::stream_rng(seed, 0);
        let vals: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Curve::new(grid.clone(), vals).unwrap()
    }

    #[test]
    fn hessian_vanishes_along_the_ray() {
        let grid = unit_grid(40);
        let u = random_curve(&grid, 1);
        let h = hessian_at(&u, &u.scale(3.0)).unwrap();
        assert!(h.norm2() < 1e-12);
    }

    #[test]
    fn hessian_is_projection_over_norm_on_orthogonal_part() {
        let grid = unit_grid(40);
        let u = random_curve(&grid, 2);
        let probe = random_curve(&grid, 3);
        let coeff = probe.inner(&u).unwrap() / u.inner(&u).unwrap();
        let eta = axpby(1.0, &probe, -coeff, &u).unwrap();
        let h = hessian_at(&u, &eta).unwrap();
        let expected = eta.scale(1.0 / u.norm2());
        for (a, b) in h.values().iter().zip(expected.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hessian_matches_central_finite_difference() {
        let grid = unit_grid(30);
        for seed in 0..5 {
            let u = random_curve(&grid, 10 + seed);
            let eta = random_curve(&grid, 20 + seed);
            let h = hessian_at(&u, &eta).unwrap();
            let eps = 1e-6;
            let plus = spatial_sign(&axpby(1.0, &u, eps, &eta).unwrap());
            let minus = spatial_sign(&axpby(1.0, &u, -eps, &eta).unwrap());
            let fd = axpby(1.0 / (2.0 * eps), &plus, -1.0 / (2.0 * eps), &minus).unwrap();
            let err = axpby(1.0, &h, -1.0, &fd).unwrap().norm2();
            assert!(err < 1e-5, "seed {seed}: finite-difference gap {err}");
        }
    }

    #[test]
    fn hessian_rejects_zero_curve() {
        let grid = unit_grid(10);
        let zero = Curve::zero(grid.clone());
        let eta = random_curve(&grid, 4);
        assert!(matches!(hessian_at(&zero, &eta), Err(Error::ZeroCurve(_))));
    }

    #[test]
    fn hessian_degenerates_at_single_point_grids() {
        // Univariate sign map is locally constant: the drift must be zero,
        // not an error.
        let grid = Grid::scalar();
        let u = Curve::new(grid.clone(), vec![2.0]).unwrap();
        let eta = Curve::new(grid, vec![5.0]).unwrap();
        let h = hessian_at(&u, &eta).unwrap();
        assert_eq!(h.values()[0], 0.0);
    }

    #[test]
    fn j1_linear_and_zero_on_zero_shift() {
        let sample = sbm_sample(30, 25, 5);
        let grid = sample.grid().clone();
        let zero = Curve::zero(grid.clone());
        assert!(j1_hat(&sample, &zero).unwrap().norm2() == 0.0);

        let e1 = random_curve(&grid, 6);
        let e2 = random_curve(&grid, 7);
        let combo = axpby(2.0, &e1, -3.0, &e2).unwrap();
        let lhs = j1_hat(&sample, &combo).unwrap();
        let rhs = axpby(
            2.0,
            &j1_hat(&sample, &e1).unwrap(),
            -3.0,
            &j1_hat(&sample, &e2).unwrap(),
        )
        .unwrap();
        let gap = axpby(1.0, &lhs, -1.0, &rhs).unwrap().norm2();
        assert!(gap < 1e-10);
    }

    #[test]
    fn j1_single_curve_orthogonal_shift() {
        let grid = unit_grid(20);
        let w = random_curve(&grid, 8);
        let probe = random_curve(&grid, 9);
        let coeff = probe.inner(&w).unwrap() / w.inner(&w).unwrap();
        let eta = axpby(1.0, &probe, -coeff, &w).unwrap();
        let sample = PairedDiffSample::new(vec![w.clone()]).unwrap();
        let d = j1_hat(&sample, &eta).unwrap();
        let expected = eta.scale(1.0 / w.norm2());
        for (a, b) in d.values().iter().zip(expected.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn j1_rejects_zero_curves() {
        let grid = unit_grid(10);
        let w = random_curve(&grid, 10);
        let sample = PairedDiffSample::new(vec![w, Curve::zero(grid.clone())]).unwrap();
        let eta = random_curve(&grid, 11);
        assert!(matches!(j1_hat(&sample, &eta), Err(Error::ZeroCurve(_))));
    }

    #[test]
    fn j1_is_positive_semidefinite_form() {
        let sample = sbm_sample(40, 20, 12);
        for seed in 0..5 {
            let eta = random_curve(sample.grid(), 30 + seed);
            let q = eta.inner(&j1_hat(&sample, &eta).unwrap()).unwrap();
            assert!(q >= -1e-12, "form value {q}");
        }
    }

    #[test]
    fn j2_single_pair_reduction() {
        let grid = unit_grid(15);
        let w1 = random_curve(&grid, 13);
        let w2 = random_curve(&grid, 14);
        let eta = random_curve(&grid, 15);
        let sample = PairedDiffSample::new(vec![w1.clone(), w2.clone()]).unwrap();
        let d = j2_hat(&sample, &eta).unwrap();
        let pair = axpby(1.0, &w1, 1.0, &w2).unwrap();
        let expected = hessian_at(&pair, &eta).unwrap().scale(2.0);
        for (a, b) in d.values().iter().zip(expected.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn drift_estimates_match_empirical_map_derivatives() {
        // j1 against d/dt (1/n) sum S_{t eta - W_i} at t = 0, and j2 against
        // d/dt (2/(n(n-1))) sum S_{2 t eta + W_i + W_j} at t = 0.
        let n = 500;
        let m = 50;
        let sample = sbm_sample(n, m, 77);
        let grid = sample.grid().clone();
        let eta = Curve::from_fn(grid.clone(), |t| t).unwrap();
        let eps = 1e-4;

        let mean_sign_at = |t: f64| {
            let mut acc = vec![0.0; m];
            for w in sample.diffs() {
                let shifted = axpby(t, &eta, -1.0, w).unwrap();
                accumulate(&mut acc, 1.0, spatial_sign(&shifted).values());
            }
            for a in &mut acc {
                *a /= n as f64;
            }
            Curve::new(grid.clone(), acc).unwrap()
        };
        let fd1 = axpby(
            1.0 / (2.0 * eps),
            &mean_sign_at(eps),
            -1.0 / (2.0 * eps),
            &mean_sign_at(-eps),
        )
        .unwrap();
        let d1 = j1_hat(&sample, &eta).unwrap();
        let gap1 = axpby(1.0, &d1, -1.0, &fd1).unwrap().norm2();
        assert!(gap1 < 2e-3, "j1 finite-difference gap {gap1}");

        let pair_sign_at = |t: f64| {
            let mut acc = vec![0.0; m];
            let diffs = sample.diffs();
            for i in 0..n {
                for j in (i + 1)..n {
                    let pair = axpby(1.0, &diffs[i], 1.0, &diffs[j]).unwrap();
                    let shifted = axpby(2.0 * t, &eta, 1.0, &pair).unwrap();
                    accumulate(&mut acc, 1.0, spatial_sign(&shifted).values());
                }
            }
            let pairs = (n * (n - 1) / 2) as f64;
            for a in &mut acc {
                *a /= pairs;
            }
            Curve::new(grid.clone(), acc).unwrap()
        };
        let fd2 = axpby(
            1.0 / (2.0 * eps),
            &pair_sign_at(eps),
            -1.0 / (2.0 * eps),
            &pair_sign_at(-eps),
        )
        .unwrap();
        let d2 = j2_hat(&sample, &eta).unwrap();
        let gap2 = axpby(1.0, &d2, -1.0, &fd2).unwrap().norm2();
        assert!(gap2 < 2e-3, "j2 finite-difference gap {gap2}");
    }

    #[test]
    fn zero_shift_power_is_alpha() {
        let sample = sbm_sample(400, 40, 21);
        let calib = CalibrationConfig {
            mc_draws: 50_000,
            seed: 5,
            drop_tol: 1e-12,
        };
        let shift = ShiftSpec::new(ShiftFamily::Eta2, 0.0).unwrap();
        let pt =
            asymp_power_signtests(SignKind::Sign, &sample, &shift, 0.05, &calib, 20_000).unwrap();
        assert!((pt.power - 0.05).abs() < 0.01, "power {}", pt.power);
        assert!(pt.residual_shift < 1e-20);

        let cfg = MeanTestConfig::default();
        for kind in [TestId::T1, TestId::T2, TestId::T3] {
            let pt =
                asymp_power_meantests(kind, &sample, &shift, 0.05, &cfg, &calib, 20_000).unwrap();
            assert!(
                (pt.power - 0.05).abs() < 0.01,
                "{:?} power {}",
                kind,
                pt.power
            );
        }
    }

    #[test]
    fn power_monotone_in_shift_magnitude() {
        let sample = sbm_sample(400, 40, 23);
        let calib = CalibrationConfig {
            mc_draws: 20_000,
            seed: 6,
            drop_tol: 1e-12,
        };
        let mut last = 0.0;
        for (i, c) in [0.0, 1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
            let shift = ShiftSpec::new(ShiftFamily::Eta2, c).unwrap();
            let pt =
                asymp_power_signtests(SignKind::SignedRank, &sample, &shift, 0.05, &calib, 10_000)
                    .unwrap();
            assert!(
                pt.power >= last - 0.02,
                "not monotone at step {i}: {} < {last}",
                pt.power
            );
            last = pt.power;
        }
        assert!(last > 0.9, "large-shift power {last}");
    }

    #[test]
    fn heavy_tails_degrade_mean_test_asymptotic_power() {
        // The t(5) scale mixture inflates the covariance spectrum by
        // df/(df-2), shrinking every noncentrality beta^2/lambda and with it
        // the T1 power at a matched shift.
        let calib = CalibrationConfig {
            mc_draws: 20_000,
            seed: 3,
            drop_tol: 1e-12,
        };
        let cfg = MeanTestConfig::default();
        let shift = ShiftSpec::new(ShiftFamily::Eta1, 1.0).unwrap();
        let grid = unit_grid(40);
        let draws = 20_000;

        let sbm = sample_process(
            &ProcessSpec::with_default_terms(ProcessKind::SBm, grid.clone()).unwrap(),
            600,
            31,
        )
        .unwrap();
        let heavy = sample_process(
            &ProcessSpec::with_default_terms(ProcessKind::TProcess { df: 5 }, grid).unwrap(),
            600,
            32,
        )
        .unwrap();
        for kind in [TestId::T1, TestId::T2] {
            let light_power = asymp_power_meantests(kind, &sbm, &shift, 0.05, &cfg, &calib, draws)
                .unwrap()
                .power;
            let heavy_power =
                asymp_power_meantests(kind, &heavy, &shift, 0.05, &cfg, &calib, draws)
                    .unwrap()
                    .power;
            assert!(
                heavy_power < light_power - 0.05,
                "{:?}: t(5) power {heavy_power} not below sBm power {light_power}",
                kind
            );
        }
    }

    #[test]
    fn mean_power_concentrates_on_first_component() {
        // eta proportional to the top empirical eigenfunction puts all its
        // noncentrality in component one.
        let sample = sbm_sample(500, 30, 29);
        let calib = CalibrationConfig::default();
        let spec = spectrum(&sigma_hat(&sample).unwrap(), calib.drop_tol).unwrap();
        let a = 0.9;
        let eta = spec.eigenfunctions()[0].scale(a);
        let cfg = MeanTestConfig::default();
        let (weights, betas, residual) = mean_limit_parts(TestId::T3, &spec, &eta, &cfg).unwrap();
        assert!(residual.abs() < 1e-18);
        assert!(weights.iter().all(|w| *w == 1.0));
        let delta1 = betas[0] * betas[0];
        assert!((delta1 - a * a / spec.eigenvalues()[0]).abs() < 1e-8);
        for b in &betas[1..] {
            assert!(b.abs() < 1e-6);
        }
    }
}
