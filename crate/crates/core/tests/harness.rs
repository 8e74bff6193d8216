use smd_core::harness::stats::loglog_fit;
use smd_core::harness::{run_experiment, trial_seed, verify_invariants, ExperimentConfig, VerifyOptions};

fn config(pairs: &[(&str, &str)]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_overrides(pairs.iter().copied()).unwrap();
    cfg
}

#[test]
fn rates_csv_is_sorted_and_reproducible() {
    let cfg = config(&[("n", "5"), ("m", "15"), ("n_grid", "300, 100, 200, 100"), ("trials", "12"), ("seed", "9")]);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.rates_csv(), b.rates_csv());
    assert_eq!(a.trials_csv(), b.trials_csv());
    let csv = a.rates_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("N,trials,mean_delta,stderr,theorem_rhs,bound_ok"));
    let ns: Vec<usize> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ns, vec![100, 200, 300]);
    assert_eq!(a.trials.len(), 36);
}

#[test]
fn bound_recomputes_from_report_metadata() {
    let cfg = config(&[("n", "5"), ("m", "15"), ("n_grid", "50,150"), ("trials", "8"), ("schedule", "inv-sqrt"), ("c", "0.3")]);
    let rep = run_experiment(&cfg).unwrap().report;
    for row in &rep.rows {
        let steps: Vec<f64> = (0..row.n).map(|t| rep.c / ((t + 1) as f64).sqrt()).collect();
        let sum: f64 = steps.iter().sum();
        let sum_sq: f64 = steps.iter().map(|a| a * a).sum();
        let (rho, rh, l) = (rep.rho, rep.rho_hat, rep.lipschitz);
        let rhs = rh / (rh - rho) * (rep.envelope_x0 - rep.t_min + rh * steps[0] * rep.reg_x0 + 0.5 * rh * l * l * sum_sq) / sum;
        assert!((rhs - row.theorem_rhs).abs() <= 1e-12 * rhs, "{rhs} vs {}", row.theorem_rhs);
        assert!(row.corollary_rhs.is_none());
    }
}

#[test]
fn constant_steps_report_both_displays() {
    let cfg = config(&[("n", "5"), ("m", "15"), ("n_grid", "64"), ("trials", "8"), ("c", "0.2")]);
    let rep = run_experiment(&cfg).unwrap().report;
    let row = &rep.rows[0];
    let (rho, l, c, n) = (rep.rho, rep.lipschitz, rep.c, row.n as f64);
    let cor = 2.0 * ((rep.envelope_x0 - rep.t_min + rho * c * c * l * l) / (c * n.sqrt()) + rep.reg_x0 / n);
    assert!((cor - row.corollary_rhs.unwrap()).abs() <= 1e-12 * cor);
}

#[test]
fn zero_noise_quadratic_converges_and_bound_holds() {
    let cfg = config(&[
        ("bench", "quadratic"),
        ("n", "4"),
        ("lambda", "0"),
        ("n_grid", "100,1000,10000"),
        ("trials", "30"),
    ]);
    let out = run_experiment(&cfg).unwrap();
    let rows = &out.report.rows;
    assert!(rows.iter().all(|r| r.bound_ok));
    assert!(rows[2].mean_delta < rows[0].mean_delta);
    assert!(out.report.checks.iter().any(|c| c.name == "bound" && c.passed));
}

#[test]
fn artifacts_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&[("n", "4"), ("m", "12"), ("n_grid", "40"), ("trials", "5")]);
    let out = run_experiment(&cfg).unwrap();
    out.write(dir.path()).unwrap();
    for f in ["rates.csv", "trials.csv", "report.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["t_min_source"], "known");
    assert_eq!(json["rows"].as_array().unwrap().len(), 1);
    let trials = std::fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 6);
}

#[test]
fn trial_seeds_are_distinct() {
    let mut seen = std::collections::HashSet::new();
    for n in [100, 1000, 10000] {
        for k in 0..50 {
            assert!(seen.insert(trial_seed(2024, n, k)));
        }
    }
    assert_ne!(trial_seed(1, 100, 0), trial_seed(2, 100, 0));
}

#[test]
fn slope_of_exact_power_law() {
    let xs = [100.0, 1000.0, 10000.0, 100000.0];
    let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
    let fit = loglog_fit(&xs, &ys).unwrap();
    assert!((fit.slope + 0.5).abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    // two points give a line but no interval
    assert!(loglog_fit(&xs[..2], &ys[..2]).unwrap().ci_high.is_infinite());
    assert!(loglog_fit(&xs[..1], &ys[..1]).is_none());
}

#[test]
fn selected_suite_and_unknown_suite() {
    let rep = verify_invariants(Some("three-point"), &VerifyOptions::default()).unwrap();
    assert_eq!(rep.suites.len(), 1);
    assert!(rep.passed, "{}", rep.summary());
    assert!(verify_invariants(Some("no-such-suite"), &VerifyOptions::default()).is_err());
}
