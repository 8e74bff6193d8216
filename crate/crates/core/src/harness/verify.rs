//! Property suites run by `verify`. Every suite is deterministic given the
//! seed; failures are report entries, never panics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::experiment::Check;
use super::stats::{chi_square, max_multinomial_z};
use crate::error::{Error, Result};
use crate::geometry::{Dgf, FeasibleSet, Geometry, NormKind};
use crate::objective::{
    certify_rwc, make_benchmark, moment_check, src_moment_check, stream, unbiasedness_check, BenchKind, Benchmark,
    BenchmarkSpec, GeometryKind, OracleMode, Stream,
};
use crate::smd::{sample_output_index, smd_run, RunConfig, Schedule, Storage, OUTPUT_STREAM};
use crate::stationarity::{bregman_prox, bregman_prox_from, envelope_gradient_diag, InnerOptions};
use crate::vecops;

pub const SUITES: [&str; 8] = [
    "three-point",
    "sc-floor",
    "grad-vs-delta",
    "prox-uniqueness",
    "envelope-gradient",
    "rwc",
    "moments",
    "output-rule",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub triples: usize,
    pub pairs: usize,
    pub points: usize,
    pub prox_instances: usize,
    pub grid_step: f64,
    pub fd_points: usize,
    pub rwc_pairs: usize,
    pub output_draws: usize,
    /// Multiplies every recorded `rho` in the RWC suite (mutation testing).
    pub rho_scale: f64,
    pub inner: InnerOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            triples: 1_000,
            pairs: 10_000,
            points: 100,
            prox_instances: 10,
            grid_step: 1e-3,
            fd_points: 20,
            rwc_pairs: 3_000,
            output_draws: 100_000,
            rho_scale: 1.0,
            inner: InnerOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for suite in &self.suites {
            for c in &suite.checks {
                let _ = writeln!(
                    s,
                    "{} {}/{}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    suite.name,
                    c.name,
                    c.detail
                );
            }
        }
        s
    }
}

/// Runs the named suite, or every suite for `None` / `"all"`.
pub fn verify_invariants(selector: Option<&str>, opts: &VerifyOptions) -> Result<VerifyReport> {
    let names: Vec<&str> = match selector {
        None | Some("all") => SUITES.to_vec(),
        Some(name) => {
            let name = SUITES
                .iter()
                .find(|s| **s == name)
                .ok_or_else(|| Error::invalid(format!("unknown suite `{name}`; expected one of {}", SUITES.join(", "))))?;
            vec![*name]
        }
    };
    let mut suites = Vec::new();
    for name in names {
        let checks = run_suite(name, opts);
        suites.push(SuiteReport {
            name: name.into(),
            passed: checks.iter().all(|c| c.passed),
            checks,
        });
    }
    let passed = suites.iter().all(|s| s.passed);
    Ok(VerifyReport {
        seed: opts.seed,
        suites,
        passed,
    })
}

/// Runs one suite and returns its checks.
pub fn run_suite(name: &str, opts: &VerifyOptions) -> Vec<Check> {
    let label = SUITES.iter().position(|s| *s == name).unwrap_or(99) as u64 + 100;
    let mut rng = stream(opts.seed, label);
    match name {
        "three-point" => three_point(opts, &mut rng),
        "sc-floor" => sc_floor(opts, &mut rng),
        "grad-vs-delta" => grad_vs_delta(opts, &mut rng),
        "prox-uniqueness" => prox_uniqueness(opts, &mut rng),
        "envelope-gradient" => envelope_gradient(opts, &mut rng),
        "rwc" => rwc(opts, &mut rng),
        "moments" => moments(opts, &mut rng),
        "output-rule" => output_rule(opts),
        other => vec![fail(other, format!("unknown suite `{other}`"))],
    }
}

fn fail(name: &str, detail: String) -> Check {
    Check {
        name: name.into(),
        passed: false,
        detail,
    }
}

fn check(name: impl Into<String>, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// The geometries exercised by the divergence suites.
pub fn test_geometries(dim: usize) -> Vec<Geometry> {
    let mut out = vec![
        Geometry::euclidean(dim, FeasibleSet::WholeSpace),
        Geometry::euclidean(dim, FeasibleSet::Ball { norm: NormKind::L2, radius: 2.0 }),
        Geometry::entropy_simplex(dim, 1.0),
        Geometry::entropy_simplex(dim, 3.0),
        Geometry::new(
            dim,
            FeasibleSet::Simplex { radius: 1.0 },
            Dgf::Blend(vec![(0.5, Dgf::Euclidean), (0.5, Dgf::Entropy)]),
        ),
    ];
    out.drain(..).map(|g| g.expect("valid test geometry")).collect()
}

/// Benchmarks covered by the per-benchmark suites, with whether the recorded
/// modulus is within a factor two of the true one, so that halving it must
/// produce a violation. The entropy-geometry moduli of phase retrieval and
/// regression go through `||d||_1^2 <= 2 D` and are conservative by more than
/// that; the quadratic is convex.
pub fn roster() -> Vec<(BenchmarkSpec, bool)> {
    let pr = BenchKind::PhaseRetrieval { n: 10, m: 30, seed: 1 };
    let sr = BenchKind::SparseNcvxRegression {
        n: 10,
        m: 30,
        lambda: 0.05,
        seed: 1,
    };
    let toy = BenchKind::EntropyToy { n: 10, seed: 1 };
    let quad = BenchKind::Quadratic {
        n: 10,
        seed: 1,
        noise: 0.1,
    };
    vec![
        (BenchmarkSpec::new(pr.clone(), GeometryKind::Euclidean), true),
        (BenchmarkSpec::new(pr, GeometryKind::Entropy), false),
        (BenchmarkSpec::new(sr.clone(), GeometryKind::Euclidean), true),
        (BenchmarkSpec::new(sr, GeometryKind::Entropy), false),
        (BenchmarkSpec::new(toy, GeometryKind::Entropy), true),
        (BenchmarkSpec::new(quad.clone(), GeometryKind::Euclidean), false),
        (BenchmarkSpec::new(quad, GeometryKind::Entropy), false),
    ]
}

fn label(b: &Benchmark) -> String {
    format!("{}/{}", b.name(), b.geometry.name())
}

fn for_each_bench(mut f: impl FnMut(&Benchmark, bool) -> Check) -> Vec<Check> {
    roster()
        .into_iter()
        .map(|(spec, tight)| match make_benchmark(&spec) {
            Ok(b) => f(&b, tight),
            Err(e) => fail(spec.kind.name(), format!("could not build benchmark: {e}")),
        })
        .collect()
}

fn three_point(opts: &VerifyOptions, rng: &mut Stream) -> Vec<Check> {
    test_geometries(5)
        .iter()
        .map(|g| {
            let mut worst = 0.0f64;
            let mut errors = 0;
            for _ in 0..opts.triples {
                let (x, y, z) = (g.sample_point(rng, 1.0), g.sample_point(rng, 1.0), g.sample_point(rng, 1.0));
                match g.three_point_residual(&x, &y, &z) {
                    Ok(r) => worst = worst.max(r.abs()),
                    Err(_) => errors += 1,
                }
            }
            check(
                g.name() + &set_tag(g),
                worst <= 1e-10 && errors == 0,
                format!("max |residual| {worst:.3e} over {} triples (<= 1e-10), {errors} errors", opts.triples),
            )
        })
        .collect()
}

fn set_tag(g: &Geometry) -> String {
    match g.feasible_set() {
        FeasibleSet::WholeSpace => "@R^n".into(),
        FeasibleSet::Ball { radius, .. } => format!("@ball({radius})"),
        FeasibleSet::Simplex { radius } => format!("@simplex({radius})"),
        FeasibleSet::Box { .. } => "@box".into(),
    }
}

fn sc_floor(opts: &VerifyOptions, rng: &mut Stream) -> Vec<Check> {
    test_geometries(5)
        .iter()
        .map(|g| {
            let mut worst = f64::NEG_INFINITY;
            let mut errors = 0;
            for _ in 0..opts.pairs {
                let (x, y) = (g.sample_point(rng, 1.0), g.sample_point(rng, 1.0));
                match g.bregman_divergence(&x, &y) {
                    Ok(d) => worst = worst.max(0.5 * g.norm(&vecops::sub(&x, &y)).powi(2) - d),
                    Err(_) => errors += 1,
                }
            }
            check(
                g.name() + &set_tag(g),
                worst <= 1e-12 && errors == 0,
                format!("max (||x-y||^2/2 - D) {worst:.3e} over {} pairs (<= 1e-12)", opts.pairs),
            )
        })
        .collect()
}

fn grad_vs_delta(opts: &VerifyOptions, rng: &mut Stream) -> Vec<Check> {
    for_each_bench(|b, _| {
        let obj = &b.objective;
        let lambda = 0.5 / obj.rho;
        let mut worst = f64::NEG_INFINITY;
        let mut errors = Vec::new();
        for _ in 0..opts.points {
            let z = b.geometry.sample_point(rng, obj.loss.sample_scale());
            match bregman_prox(obj, &b.geometry, lambda, &z, &opts.inner) {
                Ok(p) => worst = worst.max(p.grad_map_norm.powi(2) - p.bregman_stat),
                Err(e) => errors.push(e.to_string()),
            }
        }
        check(
            label(b),
            worst <= 1e-12 && errors.is_empty(),
            format!(
                "max (||G||^2 - Delta) {worst:.3e} over {} points (<= 1e-12){}",
                opts.points,
                errors.first().map(|e| format!("; error: {e}")).unwrap_or_default()
            ),
        )
    })
}

/// Brute-force minimiser of `phi` over a grid of step `h` on the box
/// `[lo, hi]`, followed by successive local refinements of the best cell.
pub fn grid_argmin_2d(phi: &dyn Fn(&[f64]) -> f64, lo: [f64; 2], hi: [f64; 2], h: f64) -> ([f64; 2], f64) {
    let nx = ((hi[0] - lo[0]) / h).ceil() as usize + 1;
    let ny = ((hi[1] - lo[1]) / h).ceil() as usize + 1;
    let mut best = ([lo[0], lo[1]], f64::INFINITY);
    for i in 0..nx {
        let x = (lo[0] + i as f64 * h).min(hi[0]);
        for j in 0..ny {
            let p = [x, (lo[1] + j as f64 * h).min(hi[1])];
            let v = phi(&p);
            if v < best.1 {
                best = (p, v);
            }
        }
    }
    let mut step = h;
    while step > 1e-8 {
        step *= 0.1;
        loop {
            let centre = best.0;
            for i in -50..=50 {
                for j in -50..=50 {
                    let p = [
                        (centre[0] + i as f64 * step).clamp(lo[0], hi[0]),
                        (centre[1] + j as f64 * step).clamp(lo[1], hi[1]),
                    ];
                    let v = phi(&p);
                    if v < best.1 {
                        best = (p, v);
                    }
                }
            }
            if best.0 == centre {
                break;
            }
        }
    }
    best
}

fn prox_uniqueness(opts: &VerifyOptions, rng: &mut Stream) -> Vec<Check> {
    let mut out = Vec::new();
    for geometry in [GeometryKind::Euclidean, GeometryKind::Entropy] {
        let (mut worst_grid, mut worst_restart, mut worst_phi) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
        let mut errors = Vec::new();
        for k in 0..opts.prox_instances {
            let spec = BenchmarkSpec::new(
                BenchKind::PhaseRetrieval {
                    n: 2,
                    m: 6,
                    seed: 1000 + k as u64,
                },
                geometry,
            );
            let b = match make_benchmark(&spec) {
                Ok(b) => b,
                Err(e) => {
                    errors.push(e.to_string());
                    continue;
                }
            };
            let (obj, g) = (&b.objective, &b.geometry);
            let lambda = 0.5 / obj.rho;
            let z = g.sample_point(rng, 1.0);
            let start = g.sample_point(rng, 1.0);
            let (p, q) = match (
                bregman_prox(obj, g, lambda, &z, &opts.inner),
                bregman_prox_from(obj, g, lambda, &z, &start, &opts.inner),
            ) {
                (Ok(p), Ok(q)) => (p, q),
                (Err(e), _) | (_, Err(e)) => {
                    errors.push(e.to_string());
                    continue;
                }
            };
            let zc = p.centre.clone();
            let phi = |x: &[f64]| {
                if !g.feasible_set().contains(x, 1e-12) {
                    return f64::INFINITY;
                }
                let x = g.interior(x).map(|c| c.into_owned()).unwrap_or_else(|_| x.to_vec());
                obj.value(&x) + g.bregman_divergence(&x, &zc).unwrap_or(f64::INFINITY) / lambda
            };
            let x_grid = match geometry {
                GeometryKind::Euclidean => {
                    // Phi(x) >= T_min + ||x - z||^2 / (2 lambda) bounds the search box.
                    let r = (2.0 * lambda * (obj.value(&zc) - b.t_min.value())).max(0.0).sqrt() + opts.grid_step;
                    let lo = [(zc[0] - r).max(-2.0), (zc[1] - r).max(-2.0)];
                    let hi = [(zc[0] + r).min(2.0), (zc[1] + r).min(2.0)];
                    grid_argmin_2d(&phi, lo, hi, opts.grid_step).0.to_vec()
                }
                GeometryKind::Entropy => {
                    // One free coordinate on the simplex.
                    let eps = g.boundary_eps();
                    let line = |p: &[f64]| phi(&[p[0], 1.0 - p[0]]);
                    let (p0, _) = grid_argmin_2d(&line, [eps, 0.0], [1.0 - eps, 0.0], opts.grid_step);
                    vec![p0[0], 1.0 - p0[0]]
                }
            };
            worst_grid = worst_grid.max(vecops::dist_inf(&x_grid, &p.prox_point));
            worst_restart = worst_restart.max(vecops::dist_inf(&p.prox_point, &q.prox_point));
            worst_phi = worst_phi.max(phi(&p.prox_point) - phi(&x_grid));
        }
        let tag = match geometry {
            GeometryKind::Euclidean => "euclidean",
            GeometryKind::Entropy => "entropy",
        };
        let err = errors.first().map(|e| format!("; error: {e}")).unwrap_or_default();
        out.push(check(
            format!("{tag}/grid"),
            worst_grid <= 1e-3 && errors.is_empty(),
            format!(
                "max l_inf distance to grid argmin {worst_grid:.3e} over {} 2-D instances (<= 1e-3); \
                 prox value minus grid value at most {worst_phi:.2e}{err}",
                opts.prox_instances
            ),
        ));
        out.push(check(
            format!("{tag}/restart"),
            worst_restart <= 1e-9 && errors.is_empty(),
            format!("max l_inf distance between warm starts {worst_restart:.3e} (<= 1e-9){err}"),
        ));
    }
    out
}

fn envelope_gradient(opts: &VerifyOptions, rng: &mut Stream) -> Vec<Check> {
    let specs = [
        BenchmarkSpec::new(BenchKind::PhaseRetrieval { n: 10, m: 30, seed: 1 }, GeometryKind::Euclidean),
        BenchmarkSpec::new(
            BenchKind::SparseNcvxRegression {
                n: 10,
                m: 30,
                lambda: 0.05,
                seed: 1,
            },
            GeometryKind::Euclidean,
        ),
        BenchmarkSpec::new(BenchKind::PhaseRetrieval { n: 10, m: 30, seed: 1 }, GeometryKind::Entropy),
        BenchmarkSpec::new(BenchKind::EntropyToy { n: 10, seed: 1 }, GeometryKind::Entropy),
    ];
    let inner = opts.inner.with_tol(opts.inner.tol.min(1e-12));
    specs
        .iter()
        .map(|spec| {
            let b = match make_benchmark(spec) {
                Ok(b) => b,
                Err(e) => return fail(spec.kind.name(), e.to_string()),
            };
            match fd_envelope(&b, opts.fd_points, &inner, rng) {
                Ok(worst) => check(
                    label(&b),
                    worst <= 1e-4,
                    format!("max relative FD error {worst:.3e} at {} points (<= 1e-4)", opts.fd_points),
                ),
                Err(e) => fail(&label(&b), e.to_string()),
            }
        })
        .collect()
}

/// Largest relative discrepancy between central differences of `T_lambda`
/// and its closed-form gradient, along coordinate directions (Euclidean) or
/// the tangent directions `e_i - e_n` of the simplex (entropy).
fn fd_envelope(b: &Benchmark, points: usize, inner: &InnerOptions, rng: &mut Stream) -> Result<f64> {
    let (obj, g) = (&b.objective, &b.geometry);
    let lambda = 0.5 / obj.rho;
    let n = g.dim();
    let h = 1e-5;
    let env = |z: &[f64]| bregman_prox(obj, g, lambda, z, inner).map(|p| p.envelope);
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut attempts = 0;
    while done < points {
        attempts += 1;
        if attempts > 100 * points {
            return Err(Error::invalid("could not draw interior test points"));
        }
        let z = g.sample_point(rng, 0.5 * obj.loss.sample_scale());
        let (dirs, analytic): (Vec<Vec<f64>>, Vec<f64>) = if g.is_euclidean() {
            let inside = match g.feasible_set() {
                FeasibleSet::Ball { radius, .. } => vecops::norm2(&z) + 2.0 * h < *radius,
                _ => true,
            };
            if !inside {
                continue;
            }
            let grad = bregman_prox(obj, g, lambda, &z, inner)?.grad_map;
            let dirs = (0..n)
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    e
                })
                .collect();
            (dirs, grad)
        } else {
            if z.iter().any(|v| *v < 1e-3) {
                continue;
            }
            let grad = envelope_gradient_diag(obj, g, lambda, &z, inner)?;
            let dirs: Vec<Vec<f64>> = (0..n - 1)
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    e[n - 1] = -1.0;
                    e
                })
                .collect();
            let an = dirs.iter().map(|d| vecops::dot(&grad, d)).collect();
            (dirs, an)
        };
        let fd: Vec<f64> = dirs
            .iter()
            .map(|d| {
                let zp: Vec<f64> = z.iter().zip(d).map(|(a, b)| a + h * b).collect();
                let zm: Vec<f64> = z.iter().zip(d).map(|(a, b)| a - h * b).collect();
                Ok((env(&zp)? - env(&zm)?) / (2.0 * h))
            })
            .collect::<Result<_>>()?;
        let scale = vecops::norm_inf(&analytic).max(1e-8);
        worst = worst.max(vecops::dist_inf(&fd, &analytic) / scale);
        done += 1;
    }
    Ok(worst)
}

fn rwc(opts: &VerifyOptions, rng: &mut Stream) -> Vec<Check> {
    let mut out = Vec::new();
    for (spec, tight) in roster() {
        let b = match make_benchmark(&spec) {
            Ok(b) => b,
            Err(e) => {
                out.push(fail(spec.kind.name(), e.to_string()));
                continue;
            }
        };
        let obj = b.objective.clone().with_rho(b.objective.rho * opts.rho_scale);
        let cert = certify_rwc(&obj, &b.geometry, opts.rwc_pairs, rng);
        out.push(check(
            label(&b),
            cert.passed(),
            format!(
                "{} violations above {:e} in {} pairs (max lower-model gap {:.3e}, max midpoint gap {:.3e})",
                cert.violations, cert.tol, cert.pairs, cert.max_wc_violation, cert.max_midpoint_violation
            ),
        ));
        if tight && opts.rho_scale == 1.0 {
            let halved = b.objective.clone().with_rho(0.5 * b.objective.rho);
            let cert = certify_rwc(&halved, &b.geometry, opts.rwc_pairs, rng);
            out.push(check(
                format!("{}/halved-rho", label(&b)),
                !cert.passed(),
                format!("mutation detected with {} violations", cert.violations),
            ));
        }
    }
    out
}

fn moments(_opts: &VerifyOptions, rng: &mut Stream) -> Vec<Check> {
    let draws = 2_000;
    let mut out = for_each_bench(|b, _| {
        let (mut worst, mut biased) = (0.0f64, 0);
        for _ in 0..10 {
            let x = b.geometry.sample_point(rng, b.objective.loss.sample_scale());
            let m = moment_check(&b.objective, &b.geometry, &x, draws, 0.0, rng);
            worst = worst.max(m.mean_sq_dual_norm / m.bound);
            if !unbiasedness_check(&b.objective, &x, draws, rng).within {
                biased += 1;
            }
        }
        check(
            label(b),
            worst <= 1.0 && biased <= 1,
            format!("max E||G||_*^2 / L^2 = {worst:.3} at 10 points; {biased} points beyond 3 SE of the exact subgradient"),
        )
    });
    let spec = BenchmarkSpec::new(BenchKind::EntropyToy { n: 10, seed: 1 }, GeometryKind::Entropy).with_mode(OracleMode::Src);
    out.push(match make_benchmark(&spec) {
        Ok(b) => {
            let mut worst = 0.0f64;
            let mut err = None;
            for _ in 0..10 {
                let x = b.geometry.sample_point(rng, 1.0);
                match src_moment_check(&b.objective, &b.geometry, &x, draws, rng) {
                    Ok(r) => worst = worst.max(r.m2_estimate / r.bound),
                    Err(e) => err = Some(e.to_string()),
                }
            }
            check(
                "entropy-toy/src",
                worst <= 1.05 && err.is_none(),
                format!("max E[M^2] / L^2 = {worst:.4} at 10 points (<= 1.05){}", err.unwrap_or_default()),
            )
        }
        Err(e) => fail("entropy-toy/src", e.to_string()),
    });
    out
}

fn output_rule(opts: &VerifyOptions) -> Vec<Check> {
    let n = 20;
    let mut out = Vec::new();
    for (name, schedule) in [
        ("constant", Schedule::Constant { c: 1.0 }),
        ("inv-sqrt", Schedule::InvSqrt { c: 1.0 }),
    ] {
        let steps = schedule.steps(n).expect("valid schedule");
        let total: f64 = steps.iter().sum();
        let probs: Vec<f64> = steps.iter().map(|a| a / total).collect();
        let mut rng = stream(opts.seed, OUTPUT_STREAM);
        let mut counts = vec![0u64; n];
        for _ in 0..opts.output_draws {
            counts[sample_output_index(&steps, &mut rng)] += 1;
        }
        let chi = chi_square(&counts, &probs);
        let z = max_multinomial_z(&counts, &probs);
        out.push(match name {
            "constant" => check(
                "constant/chi-square",
                chi.p_value >= 0.01,
                format!("chi^2 = {:.2} on {} dof, p = {:.4} (>= 0.01)", chi.statistic, chi.dof, chi.p_value),
            ),
            _ => check(
                "inv-sqrt/3-sigma",
                z <= 3.0,
                format!("max |count - N p| / sd = {z:.3} over {n} cells (<= 3)"),
            ),
        });
    }
    // Drawing R before the run and after it yields the same index and point.
    let spec = BenchmarkSpec::new(BenchKind::PhaseRetrieval { n: 10, m: 30, seed: 1 }, GeometryKind::Euclidean);
    out.push(match make_benchmark(&spec) {
        Ok(b) => {
            let mut mismatches = 0;
            for seed in 0..50 {
                let mut cfg = RunConfig::new(200, Schedule::InvSqrt { c: 0.1 }, b.x0.clone(), seed);
                let a = smd_run(&b.objective, &b.geometry, &cfg);
                cfg.storage = Storage::PreSampled;
                let p = smd_run(&b.objective, &b.geometry, &cfg);
                match (a, p) {
                    (Ok(a), Ok(p)) if a.r == p.r && a.x_r == p.x_r => {}
                    _ => mismatches += 1,
                }
            }
            check(
                "storage-modes",
                mismatches == 0,
                format!("{mismatches} of 50 seeds differ between stored and pre-sampled output"),
            )
        }
        Err(e) => fail("storage-modes", e.to_string()),
    });
    out
}
