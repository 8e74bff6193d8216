//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use smd_core::harness::{run_experiment, run_suite, Check, ExperimentConfig, ExperimentOutput, VerifyOptions};

struct Line {
    id: u32,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn experiment(pairs: &[(&str, &str)]) -> Result<ExperimentOutput, String> {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_overrides(pairs.iter().copied()).map_err(|e| e.to_string())?;
    run_experiment(&cfg).map_err(|e| e.to_string())
}

fn suites(names: &[&str], opts: &VerifyOptions) -> (bool, String) {
    let checks: Vec<Check> = names.iter().flat_map(|n| run_suite(n, opts)).collect();
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect();
    if failed.is_empty() {
        (true, format!("{} checks", checks.len()))
    } else {
        (false, failed.join("; "))
    }
}

fn bound_cells(out: &ExperimentOutput) -> (bool, String) {
    let cells: Vec<String> = out
        .report
        .rows
        .iter()
        .map(|r| format!("N={} {:.3e}+3*{:.1e} vs {:.3e}", r.n, r.mean_delta, r.stderr, r.theorem_rhs))
        .collect();
    (out.report.rows.iter().all(|r| r.bound_ok), cells.join(", "))
}

const PR: [(&str, &str); 6] = [
    ("bench", "phase-retrieval"),
    ("n", "10"),
    ("m", "30"),
    ("n_grid", "100,1000,10000"),
    ("trials", "50"),
    ("c", "0.2"),
];

fn main() -> ExitCode {
    let opts = VerifyOptions::default();
    let mut lines = Vec::new();

    let t0 = Instant::now();
    let pr = experiment(&[&PR[..], &[("seed", "2024")]].concat());
    let pr_time = t0.elapsed().as_secs_f64();
    lines.push(match &pr {
        Ok(out) => match &out.report.slope {
            Some(fit) => Line {
                id: 1,
                title: "rate slope on phase retrieval",
                passed: (-0.75..=-0.25).contains(&fit.slope) && pr_time <= 900.0,
                detail: format!(
                    "slope {:.3} (95% CI [{:.3}, {:.3}], R^2 {:.3}) in {pr_time:.1}s",
                    fit.slope, fit.ci_low, fit.ci_high, fit.r_squared
                ),
            },
            None => Line {
                id: 1,
                title: "rate slope on phase retrieval",
                passed: false,
                detail: out.report.slope_note.clone().unwrap_or_default(),
            },
        },
        Err(e) => Line { id: 1, title: "rate slope on phase retrieval", passed: false, detail: e.clone() },
    });

    let mut ok = true;
    let mut detail = Vec::new();
    let runs = [
        ("constant", pr.clone()),
        ("inv-sqrt", experiment(&[&PR[..], &[("seed", "2024"), ("schedule", "inv-sqrt")]].concat())),
        (
            "entropy-toy",
            experiment(&[
                ("bench", "entropy-toy"),
                ("geometry", "entropy"),
                ("trials", "50"),
                ("seed", "2024"),
                ("check_slope", "false"),
            ]),
        ),
    ];
    for (name, run) in &runs {
        match run {
            Ok(out) => {
                let (p, d) = bound_cells(out);
                ok &= p && !out.report.advisory;
                detail.push(format!("{name}: {d}"));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("{name}: {e}"));
            }
        }
    }
    lines.push(Line { id: 2, title: "theorem bound", passed: ok, detail: detail.join(" | ") });

    let (p, d) = suites(&["three-point", "sc-floor"], &opts);
    lines.push(Line { id: 3, title: "Bregman identities", passed: p, detail: d });
    let (p, d) = suites(&["grad-vs-delta"], &opts);
    lines.push(Line { id: 4, title: "stationarity ordering", passed: p, detail: d });
    let (p, d) = suites(&["prox-uniqueness"], &opts);
    lines.push(Line { id: 5, title: "prox against grid search", passed: p, detail: d });
    let (p, d) = suites(&["envelope-gradient"], &opts);
    lines.push(Line { id: 6, title: "envelope gradient", passed: p, detail: d });

    let (p, d) = suites(&["rwc"], &opts);
    let mutated = VerifyOptions { rho_scale: 0.5, ..opts.clone() };
    let caught = run_suite("rwc", &mutated).iter().any(|c| !c.passed);
    lines.push(Line {
        id: 7,
        title: "weak convexity certificates",
        passed: p && caught,
        detail: format!("{d}; halved rho detected: {caught}"),
    });

    let (p, d) = suites(&["output-rule"], &opts);
    lines.push(Line { id: 8, title: "output rule law", passed: p, detail: d });

    let src = experiment(&[
        ("bench", "entropy-toy"),
        ("geometry", "entropy"),
        ("oracle_mode", "src"),
        ("trials", "50"),
        ("seed", "2024"),
        ("check_slope", "false"),
    ]);
    let moment = run_suite("moments", &opts).into_iter().find(|c| c.name == "entropy-toy/src");
    lines.push(match (src, moment) {
        (Ok(out), Some(m)) => {
            let (p, d) = bound_cells(&out);
            let uses_final = out.report.rows.iter().all(|r| r.corollary_rhs.is_some());
            Line {
                id: 9,
                title: "SRC mode on entropy toy",
                passed: p && uses_final && m.passed,
                detail: format!("{d}; {}", m.detail),
            }
        }
        (Err(e), _) => Line { id: 9, title: "SRC mode on entropy toy", passed: false, detail: e },
        (_, None) => Line { id: 9, title: "SRC mode on entropy toy", passed: false, detail: "moment check missing".into() },
    });

    let a = experiment(&[&PR[..], &[("seed", "77"), ("n_grid", "100,1000")]].concat());
    let b = experiment(&[&PR[..], &[("seed", "77"), ("n_grid", "100,1000")]].concat());
    lines.push(match (a, b) {
        (Ok(a), Ok(b)) => {
            let same = a.rates_csv() == b.rates_csv();
            Line {
                id: 10,
                title: "determinism",
                passed: same,
                detail: format!("rates.csv {} ({} bytes)", if same { "identical" } else { "differs" }, a.rates_csv().len()),
            }
        }
        (Err(e), _) | (_, Err(e)) => Line { id: 10, title: "determinism", passed: false, detail: e },
    });

    for l in &lines {
        println!("{} criterion {:>2} {}: {}", if l.passed { "PASS" } else { "FAIL" }, l.id, l.title, l.detail);
    }
    if lines.iter().all(|l| l.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
