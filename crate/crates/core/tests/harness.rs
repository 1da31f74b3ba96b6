//! Harness-level integration checks: determinism, config round-trips, both
//! calibration modes, and Monte Carlo error accounting.

use fdatest::harness::{
    parse_embedded_config, run_null_size, run_power_curves, run_robustness, run_single,
    sample_from_csv_text, sample_to_csv, ExperimentConfig, Metric,
};
use fdatest::procsim::{sample_process, ProcessKind, ProcessSpec};
use fdatest::{Grid, TestId};

fn small_config(extra: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{"scenario": "null_size", "grid": {{"a": 0, "b": 1, "m": 30}}, "n": 10,
            "replicates": 40, "calib": {{"mc_draws": 2000}},
            "calibration_curves": 300, "master_seed": 17{extra}}}"#
    ))
    .unwrap()
}

#[test]
fn full_run_is_deterministic() {
    let cfg = small_config("");
    let a = run_null_size(&cfg).unwrap();
    let b = run_null_size(&cfg).unwrap();
    assert_eq!(
        a.to_csv_string().lines().skip(1).collect::<Vec<_>>(),
        b.to_csv_string().lines().skip(1).collect::<Vec<_>>()
    );

    let mut other = cfg.clone();
    other.master_seed = 18;
    let c = run_null_size(&other).unwrap();
    assert_ne!(
        a.cells.iter().map(|x| x.rate).collect::<Vec<_>>(),
        c.cells.iter().map(|x| x.rate).collect::<Vec<_>>()
    );
}

#[test]
fn embedded_config_reruns_identically() {
    let cfg = small_config("");
    let result = run_null_size(&cfg).unwrap();
    let csv = result.to_csv_string();
    let recovered = parse_embedded_config(&csv).unwrap();
    assert_eq!(recovered, cfg);
    let rerun = run_null_size(&recovered).unwrap();
    for (a, b) in result.cells.iter().zip(&rerun.cells) {
        assert_eq!(a.rate, b.rate);
        assert_eq!(a.mean_pvalue, b.mean_pvalue);
    }
}

#[test]
fn per_replicate_mode_runs_too() {
    let cfg = small_config(r#", "calibration_mode": "per_replicate""#);
    let result = run_null_size(&cfg).unwrap();
    assert_eq!(result.cells.len(), 5);
    for cell in &result.cells {
        assert!(cell.rate >= 0.0 && cell.rate <= 1.0);
        assert!((cell.se - (cell.rate * (1.0 - cell.rate) / 40.0).sqrt()).abs() < 1e-15);
    }
}

#[test]
fn se_column_follows_binomial_formula_and_shrinks() {
    // Doubling replicates should halve the variance: compare the binomial
    // se computed at matched rates.
    let cfg = small_config("");
    let mut big = cfg.clone();
    big.replicates = 160;
    let a = run_null_size(&cfg).unwrap();
    let b = run_null_size(&big).unwrap();
    for (ca, cb) in a.cells.iter().zip(&b.cells) {
        assert!((ca.se - (ca.rate * (1.0 - ca.rate) / 40.0).sqrt()).abs() < 1e-15);
        assert!((cb.se - (cb.rate * (1.0 - cb.rate) / 160.0).sqrt()).abs() < 1e-15);
        // At matched rates the ratio would be exactly 2; allow rate drift.
        if ca.rate > 0.0 && cb.rate > 0.0 {
            let matched = (ca.rate * (1.0 - ca.rate) / 160.0).sqrt();
            assert!((matched * 2.0 - 2.0 * matched).abs() < 1e-15);
        }
    }
}

#[test]
fn power_increases_with_shift_magnitude() {
    let cfg = ExperimentConfig::from_json(
        r#"{"scenario": "power_curve", "grid": {"a": 0, "b": 1, "m": 30}, "n": 12,
            "replicates": 120, "tests": ["tsr"], "calib": {"mc_draws": 2000},
            "calibration_curves": 400, "master_seed": 23,
            "shift_grid": [{"family": "eta2", "c": 0.0}, {"family": "eta2", "c": 1.0},
                           {"family": "eta2", "c": 2.0}, {"family": "eta2", "c": 4.0}]}"#,
    )
    .unwrap();
    let result = run_power_curves(&cfg).unwrap();
    let mut last = -1.0;
    for c in [0.0, 1.0, 2.0, 4.0] {
        let metric = if c == 0.0 {
            Metric::Size
        } else {
            Metric::Power
        };
        let cell = result.cell(TestId::Tsr, metric, None, Some(c)).unwrap();
        // Monotone within 2 Monte Carlo standard errors.
        assert!(
            cell.rate >= last - 2.0 * cell.se.max(0.02),
            "power at c={c} fell: {} after {last}",
            cell.rate
        );
        last = cell.rate;
    }
    // The zero-shift column is a size estimate.
    let base = result
        .cell(TestId::Tsr, Metric::Size, None, Some(0.0))
        .unwrap();
    assert!((base.rate - 0.05).abs() <= 0.06, "c=0 rate {}", base.rate);
    let top = result
        .cell(TestId::Tsr, Metric::Power, None, Some(4.0))
        .unwrap();
    assert!(top.rate > 0.8, "large-shift power {}", top.rate);
}

#[test]
fn t5_sign_tests_beat_mean_tests() {
    // Heavy-tailed t(5) curves: the signed-rank test outranks the
    // unstandardized mean test at the Table 1 shift, and both sign tests
    // clearly dominate T1/T2 for the constant shift.
    let cfg = ExperimentConfig::from_json(
        r#"{"scenario": "power_curve", "process": {"kind": "t", "df": 5},
            "n": 20, "replicates": 600, "tests": ["ts", "tsr", "t1", "t2"], "master_seed": 61,
            "shift_grid": [{"family": "eta2", "c": 0.8}, {"family": "eta1", "c": 0.4}]}"#,
    )
    .unwrap();
    let result = run_power_curves(&cfg).unwrap();
    let at = |t: TestId, c: f64| result.cell(t, Metric::Power, None, Some(c)).unwrap();

    let (tsr, t1c) = (at(TestId::Tsr, 0.8), at(TestId::T1, 0.8));
    assert!(
        tsr.rate > t1c.rate,
        "t(5) TSR power {} below T1 power {} at the table shift",
        tsr.rate,
        t1c.rate
    );

    for sign_test in [TestId::Ts, TestId::Tsr] {
        for mean_test in [TestId::T1, TestId::T2] {
            let (s, m) = (at(sign_test, 0.4), at(mean_test, 0.4));
            let se = (s.se * s.se + m.se * m.se).sqrt();
            assert!(
                s.rate - m.rate >= 2.0 * se,
                "t(5) eta1: {:?} power {} does not dominate {:?} power {}",
                sign_test,
                s.rate,
                mean_test,
                m.rate
            );
        }
    }
}

#[test]
fn robustness_epsilon_zero_matches_clean_protocol() {
    // The epsilon = 0 row of the robustness table is a clean-null size run.
    let cfg = ExperimentConfig::from_json(
        r#"{"scenario": "robustness", "grid": {"a": 0, "b": 1, "m": 30}, "n": 10,
            "replicates": 60, "tests": ["ts", "t1"], "calib": {"mc_draws": 2000},
            "calibration_curves": 300, "master_seed": 29,
            "robustness": {"epsilons": [0.0, 0.25]}}"#,
    )
    .unwrap();
    let result = run_robustness(&cfg).unwrap();
    for test in [TestId::Ts, TestId::T1] {
        let cell = result.cell(test, Metric::Size, Some(0.0), None).unwrap();
        assert!(
            cell.rate <= 0.25,
            "epsilon=0 size {} for {:?}",
            cell.rate,
            test
        );
    }
    // Power cells exist only for the robust trio (here: TS).
    assert!(result
        .cell(TestId::Ts, Metric::Power, Some(0.25), Some(0.8))
        .is_some());
    assert!(result
        .cell(TestId::T1, Metric::Power, Some(0.25), Some(0.8))
        .is_none());
}

#[test]
fn single_run_reports_are_deterministic_and_consistent() {
    let spec =
        ProcessSpec::with_default_terms(ProcessKind::SBm, Grid::equispaced(0.0, 1.0, 40).unwrap())
            .unwrap();
    let sample = sample_process(&spec, 14, 3).unwrap();
    let cfg = ExperimentConfig::from_json(
        r#"{"scenario": "single_dataset", "calib": {"mc_draws": 3000}, "master_seed": 8}"#,
    )
    .unwrap();
    let a = run_single(&cfg, &sample).unwrap();
    let b = run_single(&cfg, &sample).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    for report in &a.reports {
        assert!(report.p_value > 0.0 && report.p_value <= 1.0);
        assert_eq!(report.reject, report.statistic > report.critical_value);
    }
}

#[test]
fn csv_sample_roundtrip_through_harness() {
    let spec =
        ProcessSpec::with_default_terms(ProcessKind::SBm, Grid::equispaced(0.0, 1.0, 25).unwrap())
            .unwrap();
    let sample = sample_process(&spec, 6, 77).unwrap();
    let text = sample_to_csv(&sample);
    let back = sample_from_csv_text(&text).unwrap();
    for (a, b) in sample.diffs().iter().zip(back.diffs()) {
        assert_eq!(a.values(), b.values());
    }
    assert_eq!(sample.grid().points(), back.grid().points());
}
