use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smd_core::harness::{run_experiment, verify_invariants, ExperimentConfig, ExperimentOutput, VerifyOptions};
use smd_core::objective::{make_benchmark, BenchKind, Benchmark, BenchmarkSpec, GeometryKind};
use smd_core::stationarity::{bregman_prox, InnerOptions};

#[derive(Parser)]
#[command(name = "smd", version, about = "Proximal stochastic mirror descent: rate experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file (key=value or JSON).
    Run {
        config: PathBuf,
        /// Override a config key; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for rates.csv, trials.csv and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one property suite, or all of them.
    Verify {
        suite: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Multiply every recorded rho in the RWC suite by this factor.
        #[arg(long, default_value_t = 1.0)]
        mutate_rho: f64,
        /// Write the machine-readable report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Rate experiment from flags alone.
    Sweep {
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        n_grid: Vec<String>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        bench: BenchArgs,
        /// Stepsize constant, or `auto`.
        #[arg(long, default_value = "auto")]
        c: String,
        #[arg(long, default_value = "constant")]
        schedule: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bregman prox and stationarity measures at the points of a CSV file.
    Prox {
        #[command(flatten)]
        bench: BenchArgs,
        /// One point per line, comma-separated coordinates.
        #[arg(long)]
        point_file: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Write the rows here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the JSON record of a benchmark instance.
    Bench {
        #[command(flatten)]
        bench: BenchArgs,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark name, or a path to a benchmark JSON record.
    #[arg(long)]
    bench: String,
    #[arg(long, default_value = "euclidean")]
    geometry: String,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 30)]
    m: usize,
    /// l1 weight (regression) or oracle noise (quadratic).
    #[arg(long, default_value_t = 0.05)]
    lambda_reg: f64,
    #[arg(long, default_value_t = 1)]
    bench_seed: u64,
}

impl BenchArgs {
    fn load(&self) -> Result<Benchmark, String> {
        if self.bench.ends_with(".json") {
            let text = std::fs::read_to_string(&self.bench).map_err(|e| format!("{}: {e}", self.bench))?;
            return Benchmark::from_json(&text).map_err(|e| e.to_string());
        }
        let geometry: GeometryKind = self.geometry.parse().map_err(|e: smd_core::Error| e.to_string())?;
        let kind =
            BenchKind::from_name(&self.bench, self.n, self.m, self.lambda_reg, self.bench_seed).map_err(|e| e.to_string())?;
        make_benchmark(&BenchmarkSpec::new(kind, geometry)).map_err(|e| e.to_string())
    }

    fn overrides(&self) -> Vec<(String, String)> {
        vec![
            ("bench".into(), self.bench.clone()),
            ("geometry".into(), self.geometry.clone()),
            ("n".into(), self.n.to_string()),
            ("m".into(), self.m.to_string()),
            ("lambda".into(), self.lambda_reg.to_string()),
            ("bench_seed".into(), self.bench_seed.to_string()),
        ]
    }
}

enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            set,
            trials,
            seed,
            out,
        } => cmd_run(&config, &set, trials, seed, out),
        Command::Verify {
            suite,
            seed,
            mutate_rho,
            json,
        } => cmd_verify(suite.as_deref(), seed, mutate_rho, json),
        Command::Sweep {
            n_grid,
            trials,
            seed,
            bench,
            c,
            schedule,
            set,
            out,
        } => cmd_sweep(&n_grid, trials, seed, &bench, &c, &schedule, &set, out),
        Command::Prox {
            bench,
            point_file,
            lambda,
            tol,
            out,
        } => cmd_prox(&bench, &point_file, lambda, tol, out),
        Command::Bench { bench } => bench.load().and_then(|b| {
            println!("{}", b.to_json().map_err(|e| e.to_string())?);
            Ok(Outcome::Pass)
        }),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn split_pairs(set: &[String]) -> Result<Vec<(String, String)>, String> {
    set.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| format!("--set expects KEY=VALUE, got `{kv}`"))
        })
        .collect()
}

fn apply(cfg: &mut ExperimentConfig, pairs: &[(String, String)]) -> Result<(), String> {
    cfg.apply_overrides(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
        .map_err(|e| e.to_string())
}

fn cmd_run(
    path: &Path,
    set: &[String],
    trials: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<Outcome, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut pairs = split_pairs(set)?;
    if let Some(t) = trials {
        pairs.push(("trials".into(), t.to_string()));
    }
    if let Some(s) = seed {
        pairs.push(("seed".into(), s.to_string()));
    }
    apply(&mut cfg, &pairs)?;
    let dir = out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    finish(&cfg, &dir)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    n_grid: &[String],
    trials: usize,
    seed: u64,
    bench: &BenchArgs,
    c: &str,
    schedule: &str,
    set: &[String],
    out: Option<PathBuf>,
) -> Result<Outcome, String> {
    let mut cfg = ExperimentConfig::default();
    let mut pairs = bench.overrides();
    if !n_grid.is_empty() {
        pairs.push(("n_grid".into(), n_grid.join(",")));
    }
    pairs.push(("trials".into(), trials.to_string()));
    pairs.push(("seed".into(), seed.to_string()));
    pairs.push(("c".into(), c.into()));
    pairs.push(("schedule".into(), schedule.into()));
    pairs.extend(split_pairs(set)?);
    apply(&mut cfg, &pairs)?;
    let dir = out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    finish(&cfg, &dir)
}

fn finish(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, String> {
    let output: ExperimentOutput = run_experiment(cfg).map_err(|e| e.to_string())?;
    output.write(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let r = &output.report;
    println!(
        "{} on {}: rho = {:.6}, rho_hat = {:.6}, L = {:.6}, c = {:.6}, T_min = {:.6} ({})",
        r.benchmark, r.geometry, r.rho, r.rho_hat, r.lipschitz, r.c, r.t_min, r.t_min_source
    );
    print!("{}", output.rates_csv());
    for c in &r.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(note) = &r.slope_note {
        println!("note: {note}");
    }
    println!("wrote {}", dir.display());
    Ok(if r.passed { Outcome::Pass } else { Outcome::Fail })
}

fn cmd_verify(suite: Option<&str>, seed: Option<u64>, mutate_rho: f64, json: Option<PathBuf>) -> Result<Outcome, String> {
    let mut opts = VerifyOptions::default();
    if let Some(s) = seed {
        opts.seed = s;
    }
    if !(mutate_rho > 0.0) {
        return Err("--mutate-rho must be positive".into());
    }
    opts.rho_scale = mutate_rho;
    let report = verify_invariants(suite, &opts).map_err(|e| e.to_string())?;
    print!("{}", report.summary());
    if let Some(path) = json {
        let text = report.to_json().map_err(|e| e.to_string())?;
        std::fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(if report.passed { Outcome::Pass } else { Outcome::Fail })
}

fn read_points(path: &Path, dim: usize) -> Result<Vec<Vec<f64>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let p = match parsed {
            Ok(p) => p,
            // A header row.
            Err(_) if points.is_empty() && i == 0 => continue,
            Err(e) => return Err(format!("{}:{}: {e}", path.display(), i + 1)),
        };
        if p.len() != dim {
            return Err(format!(
                "{}:{}: expected {dim} coordinates, found {}",
                path.display(),
                i + 1,
                p.len()
            ));
        }
        points.push(p);
    }
    Ok(points)
}

fn cmd_prox(bench: &BenchArgs, point_file: &Path, lambda: f64, tol: f64, out: Option<PathBuf>) -> Result<Outcome, String> {
    let b = bench.load()?;
    let points = read_points(point_file, b.geometry.dim())?;
    let opts = InnerOptions::default().with_tol(tol);
    let mut s = String::from("point,lambda,envelope,grad_map_norm,bregman_stat,method,iters,residual,converged");
    for i in 0..b.geometry.dim() {
        let _ = write!(s, ",x_hat{i}");
    }
    s.push('\n');
    let mut all_ok = true;
    for (k, z) in points.iter().enumerate() {
        match bregman_prox(&b.objective, &b.geometry, lambda, z, &opts) {
            Ok(p) => {
                all_ok &= p.converged;
                let _ = write!(
                    s,
                    "{k},{lambda:e},{:e},{:e},{:e},{},{},{:e},{}",
                    p.envelope,
                    p.grad_map_norm,
                    p.bregman_stat,
                    serde_json::to_value(p.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    p.solver_iters,
                    p.residual,
                    p.converged
                );
                for v in &p.prox_point {
                    let _ = write!(s, ",{v:e}");
                }
                s.push('\n');
            }
            Err(e) => return Err(format!("point {k}: {e}")),
        }
    }
    match out {
        Some(path) => std::fs::write(&path, s).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{s}"),
    }
    Ok(if all_ok { Outcome::Pass } else { Outcome::Fail })
}
