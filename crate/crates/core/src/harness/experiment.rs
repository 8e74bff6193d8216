//! Monte-Carlo estimation of `E[Delta_{1/rho_hat}(x_R)]` over an `N` grid.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use web_time::Instant;

use super::config::{ExperimentConfig, ScheduleFamily};
use super::stats::{loglog_fit, mean_stderr, SlopeFit};
use crate::error::{Error, Result};
use crate::objective::{make_benchmark, Benchmark, OracleMode, TMin};
use crate::smd::{corollary_rhs, corollary_stepsize, deterministic_md_run, smd_run, theorem_rhs, OutputRule, RunConfig, Schedule};
use crate::stationarity::{bregman_prox, stationarity_at, InnerOptions};

/// Seed of trial `k` at grid size `n` (SplitMix64 finaliser chain).
pub fn trial_seed(master: u64, n: usize, k: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(master ^ mix((n as u64) ^ mix(k as u64).rotate_left(17)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub r: usize,
    pub delta: f64,
    /// `T(x_R)`.
    pub objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub trials: usize,
    pub failures: usize,
    pub mean_delta: f64,
    pub stderr: f64,
    pub theorem_rhs: f64,
    pub corollary_rhs: Option<f64>,
    pub bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub config: ExperimentConfig,
    pub benchmark: String,
    pub geometry: String,
    pub rho: f64,
    pub rho_hat: f64,
    pub lipschitz: f64,
    pub c: f64,
    pub t_min: f64,
    /// `known`, `best-known` or `observed`.
    pub t_min_source: String,
    /// Bound checks are informational when `T_min` is not known exactly.
    pub advisory: bool,
    /// `T_{1/rho_hat}(x0)`.
    pub envelope_x0: f64,
    /// `T_{1/(2 rho)}(x0)`, the quantity in the constant-step constant.
    pub envelope_x0_half: f64,
    pub reg_x0: f64,
    pub rows: Vec<RateRow>,
    pub slope: Option<SlopeFit>,
    pub slope_note: Option<String>,
    pub slope_band: [f64; 2],
    pub checks: Vec<Check>,
    pub passed: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: RateReport,
    pub trials: Vec<TrialRow>,
}

impl ExperimentOutput {
    pub fn rates_csv(&self) -> String {
        let mut s = String::from("N,trials,mean_delta,stderr,theorem_rhs,bound_ok\n");
        for r in &self.report.rows {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{}",
                r.n, r.trials, r.mean_delta, r.stderr, r.theorem_rhs, r.bound_ok
            );
        }
        s
    }

    pub fn trials_csv(&self) -> String {
        let mut s = String::from("N,trial,seed,R,delta,objective\n");
        for t in &self.trials {
            let _ = writeln!(s, "{},{},{},{},{:e},{:e}", t.n, t.trial, t.seed, t.r, t.delta, t.objective);
        }
        s
    }

    pub fn report_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.report)?)
    }

    /// Writes `rates.csv`, `trials.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("rates.csv"), self.rates_csv())?;
        std::fs::write(dir.join("trials.csv"), self.trials_csv())?;
        std::fs::write(dir.join("report.json"), self.report_json()?)?;
        Ok(())
    }
}

#[cfg(feature = "parallel")]
fn map_jobs<T: Send>(jobs: &[(usize, usize)], f: impl Fn(&(usize, usize)) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    jobs.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_jobs<T: Send>(jobs: &[(usize, usize)], f: impl Fn(&(usize, usize)) -> T + Sync + Send) -> Vec<T> {
    jobs.iter().map(f).collect()
}

struct Setup {
    bench: Benchmark,
    rho_hat: f64,
    c: f64,
    env_x0: f64,
    env_x0_half: f64,
    reg_x0: f64,
    inner: InnerOptions,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let bench = make_benchmark(&cfg.bench_spec()?)?;
    let obj = &bench.objective;
    if obj.rho <= 0.0 {
        return Err(Error::invalid("benchmark modulus must be positive"));
    }
    let inner = cfg.inner_options();
    let rho_hat = cfg.rho_hat_factor * obj.rho;
    let env_x0 = stationarity_at(obj, &bench.geometry, rho_hat, &bench.x0, &inner)?.envelope;
    let env_x0_half = bregman_prox(obj, &bench.geometry, 0.5 / obj.rho, &bench.x0, &inner)?.envelope;
    let c = match cfg.c {
        Some(c) => c,
        None => corollary_stepsize(env_x0_half, bench.t_min.value(), obj.rho, obj.lipschitz)?,
    };
    let reg_x0 = obj.reg.value(&bench.x0);
    Ok(Setup {
        bench,
        rho_hat,
        c,
        env_x0,
        env_x0_half,
        reg_x0,
        inner,
    })
}

fn run_trial(cfg: &ExperimentConfig, s: &Setup, n: usize, k: usize) -> TrialRow {
    let seed = trial_seed(cfg.seed, n, k);
    let obj = &s.bench.objective;
    let geom = &s.bench.geometry;
    let schedule = match cfg.schedule {
        ScheduleFamily::Constant => Schedule::Constant { c: s.c },
        ScheduleFamily::InvSqrt => Schedule::InvSqrt { c: s.c },
    };
    let deterministic = cfg.output_rule == OutputRule::ArgminDelta;
    let mut rc = RunConfig::new(n, schedule, s.bench.x0.clone(), seed);
    rc.output_rule = cfg.output_rule;
    rc.storage = cfg.storage;
    rc.record_every = cfg.record_every.unwrap_or(if deterministic { 1 } else { n });
    let outcome = if deterministic {
        deterministic_md_run(obj, geom, &rc, s.rho_hat, &s.inner).and_then(|tr| {
            let d = tr.records.iter().filter_map(|r| r.delta).fold(f64::INFINITY, f64::min);
            Ok((tr.r, d, obj.value(&tr.x_r)))
        })
    } else {
        smd_run(obj, geom, &rc).and_then(|tr| {
            let p = stationarity_at(obj, geom, s.rho_hat, &tr.x_r, &s.inner)?;
            Ok((tr.r, p.bregman_stat, obj.value(&tr.x_r)))
        })
    };
    match outcome {
        Ok((r, delta, objective)) => TrialRow {
            n,
            trial: k,
            seed,
            r,
            delta,
            objective,
            error: None,
        },
        Err(e) => TrialRow {
            n,
            trial: k,
            seed,
            r: 0,
            delta: f64::NAN,
            objective: f64::NAN,
            error: Some(e.to_string()),
        },
    }
}

/// Runs `trials` independent SMD runs for every `N` in the grid, evaluates
/// `Delta` at each output and compares the means with the bound.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let s = setup(cfg)?;
    let mut grid = cfg.n_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    let jobs: Vec<(usize, usize)> = grid.iter().flat_map(|&n| (0..cfg.trials).map(move |k| (n, k))).collect();
    let trials = map_jobs(&jobs, |&(n, k)| run_trial(cfg, &s, n, k));

    let obj = &s.bench.objective;
    let (t_min, t_min_source, advisory) = match s.bench.t_min {
        TMin::Known(v) => (v, "known", false),
        TMin::BestKnown(v) => {
            let observed = trials.iter().map(|t| t.objective).filter(|v| v.is_finite()).fold(v, f64::min);
            (observed, if observed < v { "observed" } else { "best-known" }, true)
        }
    };
    let constant_half = cfg.schedule == ScheduleFamily::Constant && cfg.rho_hat_factor == 2.0;
    let mut rows = Vec::new();
    let mut failures_total = 0;
    for &n in &grid {
        let cell: Vec<&TrialRow> = trials.iter().filter(|t| t.n == n).collect();
        let deltas: Vec<f64> = cell.iter().filter(|t| t.error.is_none()).map(|t| t.delta).collect();
        let failures = cell.len() - deltas.len();
        failures_total += failures;
        let (mean_delta, stderr) = mean_stderr(&deltas);
        let steps = match cfg.schedule {
            ScheduleFamily::Constant => Schedule::Constant { c: s.c },
            ScheduleFamily::InvSqrt => Schedule::InvSqrt { c: s.c },
        }
        .steps(n)?;
        let rhs = theorem_rhs(obj.rho, s.rho_hat, obj.lipschitz, s.env_x0, t_min, s.reg_x0, &steps);
        let cor = constant_half.then(|| corollary_rhs(obj.rho, obj.lipschitz, s.c, n, s.env_x0, t_min, s.reg_x0));
        // In SRC mode the constant-step display is the stated bound.
        let bound = match (obj.oracle_mode, cor) {
            (OracleMode::Src, Some(c)) => c,
            _ => rhs,
        };
        rows.push(RateRow {
            n,
            trials: deltas.len(),
            failures,
            mean_delta,
            stderr,
            theorem_rhs: bound,
            corollary_rhs: cor,
            bound_ok: mean_delta.is_finite() && mean_delta <= bound + 3.0 * stderr,
        });
    }

    let mut checks = Vec::new();
    let rate = failures_total as f64 / trials.len() as f64;
    checks.push(Check {
        name: "trial-failures".into(),
        passed: rate <= cfg.max_failure_rate,
        detail: format!("{failures_total} of {} trials failed", trials.len()),
    });
    if let Some(t) = trials.iter().find(|t| t.error.is_some()) {
        checks.last_mut().unwrap().detail += &format!("; first: {}", t.error.as_deref().unwrap_or(""));
    }
    let bounds_ok = rows.iter().all(|r| r.bound_ok);
    checks.push(Check {
        name: if advisory { "bound-advisory" } else { "bound" }.into(),
        passed: bounds_ok || advisory,
        detail: rows
            .iter()
            .map(|r| format!("N={}: {:.4e} <= {:.4e} + 3*{:.2e}: {}", r.n, r.mean_delta, r.theorem_rhs, r.stderr, r.bound_ok))
            .collect::<Vec<_>>()
            .join("; "),
    });

    let (slope, slope_note) = fit_rows(&rows);
    if cfg.check_slope && grid.len() >= 3 {
        let passed = slope
            .as_ref()
            .is_some_and(|f| f.slope >= cfg.slope_min && f.slope <= cfg.slope_max);
        checks.push(Check {
            name: "slope".into(),
            passed,
            detail: match &slope {
                Some(f) => format!(
                    "slope {:.4} (95% CI [{:.3}, {:.3}], R^2 {:.4}) in [{}, {}]",
                    f.slope, f.ci_low, f.ci_high, f.r_squared, cfg.slope_min, cfg.slope_max
                ),
                None => slope_note.clone().unwrap_or_default(),
            },
        });
    }
    let passed = checks.iter().all(|c| c.passed);
    let report = RateReport {
        config: cfg.clone(),
        benchmark: s.bench.name().into(),
        geometry: s.bench.geometry.name(),
        rho: obj.rho,
        rho_hat: s.rho_hat,
        lipschitz: obj.lipschitz,
        c: s.c,
        t_min,
        t_min_source: t_min_source.into(),
        advisory,
        envelope_x0: s.env_x0,
        envelope_x0_half: s.env_x0_half,
        reg_x0: s.reg_x0,
        rows,
        slope,
        slope_note,
        slope_band: [cfg.slope_min, cfg.slope_max],
        checks,
        passed,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(ExperimentOutput { report, trials })
}

/// OLS slope of `ln mean_delta` on `ln N`; refused when some mean is within
/// two standard errors of zero.
fn fit_rows(rows: &[RateRow]) -> (Option<SlopeFit>, Option<String>) {
    if rows.len() < 3 {
        return (None, Some(format!("{} grid points; at least 3 are needed", rows.len())));
    }
    if let Some(r) = rows.iter().find(|r| !(r.mean_delta > 2.0 * r.stderr)) {
        return (
            None,
            Some(format!(
                "mean delta at N={} ({:e}) is within 2 standard errors of zero",
                r.n, r.mean_delta
            )),
        );
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_delta).collect();
    (loglog_fit(&xs, &ys), None)
}
