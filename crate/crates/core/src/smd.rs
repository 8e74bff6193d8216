//! Proximal stochastic mirror descent with the stepsize-weighted random
//! output rule, its deterministic variant, and run traces.
//!
//! ```text
//! x_{t+1} = argmin_{x in X} <G(x_t, xi_t), x> + r(x) + D(x, x_t) / alpha_t
//! P(R = i) = alpha_i / sum_t alpha_t,   i = 0..N-1
//! ```

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::objective::{stream, CompositeObjective, Stream};
use crate::stationarity::{stationarity_at, InnerOptions};
use crate::vecops;

/// Sub-stream label of the stochastic oracle.
pub const ORACLE_STREAM: u64 = 1;
/// Sub-stream label of the output-index draw.
pub const OUTPUT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    /// `alpha_t = c / sqrt(N)`.
    Constant { c: f64 },
    /// `alpha_t = c / sqrt(t + 1)`.
    InvSqrt { c: f64 },
    /// Explicit non-increasing list of length `N`.
    Explicit { steps: Vec<f64> },
}

impl Schedule {
    /// The stepsizes `alpha_0..alpha_{N-1}`, validated positive and
    /// non-increasing.
    pub fn steps(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::invalid("N must be at least 1"));
        }
        let steps = match self {
            Schedule::Constant { c } => vec![c / (n as f64).sqrt(); n],
            Schedule::InvSqrt { c } => (0..n).map(|t| c / ((t + 1) as f64).sqrt()).collect(),
            Schedule::Explicit { steps } => {
                if steps.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: steps.len(),
                    });
                }
                steps.clone()
            }
        };
        if let Some(a) = steps.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::invalid(format!("stepsizes must be positive and finite, got {a}")));
        }
        if let Some(w) = steps.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::invalid(format!("stepsizes must be non-increasing (increase at t = {})", w + 1)));
        }
        Ok(steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutputRule {
    #[default]
    WeightedRandom,
    /// `R = argmin_t Delta(x_t)` over recorded iterates (deterministic variant).
    ArgminDelta,
}

/// How `x_R` is retained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Storage {
    /// Keep every iterate and pick `x_R` afterwards.
    #[default]
    StoreAll,
    /// Draw `R` before the run (its law depends only on the schedule) and
    /// keep only `x_R`.
    PreSampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_iters: usize,
    pub schedule: Schedule,
    pub x0: Vec<f64>,
    pub seed: u64,
    pub record_every: usize,
    #[serde(default)]
    pub output_rule: OutputRule,
    #[serde(default)]
    pub storage: Storage,
}

impl RunConfig {
    pub fn new(n_iters: usize, schedule: Schedule, x0: Vec<f64>, seed: u64) -> Self {
        Self {
            n_iters,
            schedule,
            x0,
            seed,
            record_every: (n_iters / 100).max(1),
            output_rule: OutputRule::WeightedRandom,
            storage: Storage::StoreAll,
        }
    }

    fn validate(&self, obj: &CompositeObjective, geom: &Geometry) -> Result<Vec<f64>> {
        if obj.dim() != geom.dim() {
            return Err(Error::DimensionMismatch {
                expected: geom.dim(),
                got: obj.dim(),
            });
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        geom.check_member(&self.x0)?;
        self.schedule.steps(self.n_iters)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub x: Vec<f64>,
    /// `T(x_t)`.
    pub objective: f64,
    pub step: f64,
    /// `||G(x_t, xi_t)||_*`.
    pub grad_dual_norm: f64,
    /// `Delta(x_t)`, filled by the deterministic variant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub config: RunConfig,
    pub records: Vec<TraceRecord>,
    pub r: usize,
    pub x_r: Vec<f64>,
    /// `r(x_0)`, needed by the bound.
    pub reg_x0: f64,
    pub sum_steps: f64,
    pub sum_sq_steps: f64,
    pub first_step: f64,
    pub wall_time_s: f64,
}

impl Trace {
    /// One row per recorded iterate.
    pub fn to_csv(&self) -> String {
        let dim = self.x_r.len();
        let mut s = String::from("t,objective,step,grad_dual_norm,delta");
        for i in 0..dim {
            let _ = write!(s, ",x{i}");
        }
        s.push('\n');
        for r in &self.records {
            let _ = write!(s, "{},{:e},{:e},{:e},", r.t, r.objective, r.step, r.grad_dual_norm);
            if let Some(d) = r.delta {
                let _ = write!(s, "{d:e}");
            }
            for v in &r.x {
                let _ = write!(s, ",{v:e}");
            }
            s.push('\n');
        }
        s
    }

    /// Config echo, output index, output point and timing.
    pub fn summary_json(&self) -> Result<String> {
        let v = serde_json::json!({
            "config": self.config,
            "R": self.r,
            "x_R": self.x_r,
            "reg_x0": self.reg_x0,
            "sum_steps": self.sum_steps,
            "sum_sq_steps": self.sum_sq_steps,
            "wall_time_s": self.wall_time_s,
            "records": self.records.len(),
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Inverse-CDF draw of `R` with `P(R = i) = steps_i / sum(steps)`.
pub fn sample_output_index(steps: &[f64], rng: &mut Stream) -> usize {
    let total: f64 = steps.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, a) in steps.iter().enumerate() {
        acc += a;
        if u < acc {
            return i;
        }
    }
    steps.len() - 1
}

/// Runs Algorithm-1 style proximal SMD.
pub fn smd_run(obj: &CompositeObjective, geom: &Geometry, cfg: &RunConfig) -> Result<Trace> {
    run(obj, geom, cfg, false)
}

fn run(obj: &CompositeObjective, geom: &Geometry, cfg: &RunConfig, exact: bool) -> Result<Trace> {
    let steps = cfg.validate(obj, geom)?;
    let start = Instant::now();
    let n = cfg.n_iters;
    let dim = geom.dim();
    let mut oracle_rng = stream(cfg.seed, ORACLE_STREAM);
    let mut output_rng = stream(cfg.seed, OUTPUT_STREAM);
    let pre_r = match (cfg.output_rule, cfg.storage) {
        (OutputRule::WeightedRandom, Storage::PreSampled) => Some(sample_output_index(&steps, &mut output_rng)),
        _ => None,
    };
    let store_all = cfg.storage == Storage::StoreAll;
    let mut all = if store_all { Vec::with_capacity(n) } else { Vec::new() };
    let mut kept = None;
    let mut records = Vec::new();
    let mut x = geom.interior(&cfg.x0)?.into_owned();
    let mut g = vec![0.0; dim];
    for (t, &alpha) in steps.iter().enumerate() {
        if exact {
            obj.loss.subgradient(&x, &mut g);
        } else {
            obj.loss.sample_subgradient(&x, &mut oracle_rng, &mut g);
        }
        if t % cfg.record_every == 0 || t + 1 == n {
            records.push(TraceRecord {
                t,
                x: x.clone(),
                objective: obj.value(&x),
                step: alpha,
                grad_dual_norm: geom.dual_norm(&g),
                delta: None,
            });
        }
        if store_all {
            all.push(x.clone());
        } else if pre_r == Some(t) {
            kept = Some(x.clone());
        }
        let next = geom.mirror_step(&x, &g, alpha, &obj.reg).map_err(|e| Error::StepFailedAt {
            iteration: t,
            source: Box::new(e),
        })?;
        if !vecops::all_finite(&next) {
            return Err(Error::Divergence { iteration: t });
        }
        x = next;
    }
    let (r, x_r) = match cfg.output_rule {
        OutputRule::ArgminDelta => (0, all.first().cloned().unwrap_or_default()),
        OutputRule::WeightedRandom => match pre_r {
            Some(r) => (r, kept.expect("pre-sampled iterate kept")),
            None => {
                let r = sample_output_index(&steps, &mut output_rng);
                (r, all.swap_remove(r))
            }
        },
    };
    Ok(Trace {
        config: cfg.clone(),
        records,
        r,
        x_r,
        reg_x0: obj.reg.value(&cfg.x0),
        sum_steps: steps.iter().sum(),
        sum_sq_steps: steps.iter().map(|a| a * a).sum(),
        first_step: steps[0],
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Deterministic mirror descent (exact subgradients). `Delta_{1/rho_hat}` is
/// evaluated on every recorded iterate and `R` is its argmin.
pub fn deterministic_md_run(
    obj: &CompositeObjective,
    geom: &Geometry,
    cfg: &RunConfig,
    rho_hat: f64,
    inner: &InnerOptions,
) -> Result<Trace> {
    if cfg.output_rule != OutputRule::ArgminDelta {
        return Err(Error::invalid("deterministic mirror descent uses the argmin-delta output rule"));
    }
    let mut cfg_all = cfg.clone();
    cfg_all.storage = Storage::PreSampled;
    let mut trace = run(obj, geom, &cfg_all, true)?;
    trace.config = cfg.clone();
    let mut best = (f64::INFINITY, 0usize);
    for (k, rec) in trace.records.iter_mut().enumerate() {
        let d = stationarity_at(obj, geom, rho_hat, &rec.x, inner)?.bregman_stat;
        rec.delta = Some(d);
        if d < best.0 {
            best = (d, k);
        }
    }
    let rec = &trace.records[best.1];
    trace.r = rec.t;
    trace.x_r = rec.x.clone();
    Ok(trace)
}

/// `c = sqrt((T_{1/(2 rho)}(x0) - T_min) / (rho L^2))`.
pub fn corollary_stepsize(t_env_x0: f64, t_min: f64, rho: f64, lipschitz: f64) -> Result<f64> {
    if !(rho > 0.0 && lipschitz > 0.0) {
        return Err(Error::invalid("rho and L must be positive"));
    }
    let gap = t_env_x0 - t_min;
    if gap < 0.0 {
        return Err(Error::InconsistentInputs(format!(
            "envelope at x0 ({t_env_x0}) is below T_min ({t_min})"
        )));
    }
    if gap == 0.0 {
        return Err(Error::DegenerateGap);
    }
    Ok((gap / (rho * lipschitz * lipschitz)).sqrt())
}

/// Right-hand side of the general bound on `E[Delta_{1/rho_hat}(x_R)]`:
/// `rho_hat/(rho_hat - rho) * (T_{1/rho_hat}(x0) - T_min + rho_hat alpha_0 r(x0)
/// + rho_hat L^2/2 sum alpha_t^2) / sum alpha_t`.
pub fn theorem_rhs(
    rho: f64,
    rho_hat: f64,
    lipschitz: f64,
    t_env_x0: f64,
    t_min: f64,
    reg_x0: f64,
    steps: &[f64],
) -> f64 {
    let s1: f64 = steps.iter().sum();
    let s2: f64 = steps.iter().map(|a| a * a).sum();
    rho_hat / (rho_hat - rho)
        * (t_env_x0 - t_min + rho_hat * steps[0] * reg_x0 + 0.5 * rho_hat * lipschitz * lipschitz * s2)
        / s1
}

/// Constant steps `c/sqrt(N)` with `rho_hat = 2 rho`:
/// `2 ((T_{1/(2rho)}(x0) - T_min + rho c^2 L^2) / (c sqrt(N)) + r(x0)/N)`.
/// Agrees with [`theorem_rhs`] when `r(x0) = 0`; otherwise the general bound
/// carries `4 rho r(x0) / N` instead of `2 r(x0) / N`.
pub fn corollary_rhs(rho: f64, lipschitz: f64, c: f64, n: usize, t_env_x0: f64, t_min: f64, reg_x0: f64) -> f64 {
    let nf = n as f64;
    2.0 * ((t_env_x0 - t_min + rho * c * c * lipschitz * lipschitz) / (c * nf.sqrt()) + reg_x0 / nf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FeasibleSet;
    use crate::objective::{Loss, Quadratic};
    use crate::regularizer::Regularizer;
    use std::sync::Arc;

    fn quad(sigma: f64) -> (CompositeObjective, Geometry) {
        let q: Arc<dyn Loss> = Arc::new(Quadratic::new(1.0, vec![1.0, -1.0], sigma));
        let obj = CompositeObjective::new(q, Regularizer::Zero, 1.0, 3.0).unwrap();
        (obj, Geometry::euclidean(2, FeasibleSet::WholeSpace).unwrap())
    }

    #[test]
    fn single_step_is_a_gradient_step() {
        let (obj, g) = quad(0.0);
        let cfg = RunConfig::new(1, Schedule::Constant { c: 0.5 }, vec![0.0, 0.0], 1);
        let tr = smd_run(&obj, &g, &cfg).unwrap();
        assert_eq!(tr.r, 0);
        assert_eq!(tr.x_r, vec![0.0, 0.0]);
        assert_eq!(tr.records[0].grad_dual_norm, 2f64.sqrt());
    }

    #[test]
    fn storage_modes_agree() {
        let (obj, g) = quad(0.3);
        let mut cfg = RunConfig::new(200, Schedule::InvSqrt { c: 0.2 }, vec![0.0, 0.0], 17);
        let a = smd_run(&obj, &g, &cfg).unwrap();
        cfg.storage = Storage::PreSampled;
        let b = smd_run(&obj, &g, &cfg).unwrap();
        assert_eq!(a.r, b.r);
        assert_eq!(a.x_r, b.x_r);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn increasing_schedules_are_rejected() {
        assert!(Schedule::Explicit { steps: vec![0.1, 0.2] }.steps(2).is_err());
        assert!(Schedule::Explicit { steps: vec![0.1, -0.1] }.steps(2).is_err());
        assert!(Schedule::Constant { c: 1.0 }.steps(0).is_err());
    }

    #[test]
    fn corollary_stepsize_cases() {
        assert_eq!(corollary_stepsize(2.0, 1.0, 1.0, 1.0).unwrap(), 1.0);
        assert!(matches!(corollary_stepsize(1.0, 1.0, 1.0, 1.0), Err(Error::DegenerateGap)));
        assert!(matches!(
            corollary_stepsize(0.5, 1.0, 1.0, 1.0),
            Err(Error::InconsistentInputs(_))
        ));
    }

    #[test]
    fn corollary_is_the_theorem_at_constant_steps() {
        let (rho, l, c, n) = (1.5, 2.0, 0.3, 400);
        let steps = Schedule::Constant { c }.steps(n).unwrap();
        let a = theorem_rhs(rho, 2.0 * rho, l, 3.0, 0.5, 0.0, &steps);
        let b = corollary_rhs(rho, l, c, n, 3.0, 0.5, 0.0);
        assert!((a - b).abs() < 1e-12 * b);
        // The regulariser terms differ: 4 rho r(x0)/N against 2 r(x0)/N.
        let a = theorem_rhs(rho, 2.0 * rho, l, 3.0, 0.5, 0.2, &steps);
        let b = corollary_rhs(rho, l, c, n, 3.0, 0.5, 0.2);
        assert!((a - b - (4.0 * rho - 2.0) * 0.2 / n as f64).abs() < 1e-12 * b);
    }

    #[test]
    fn deterministic_run_needs_argmin_rule() {
        let (obj, g) = quad(0.0);
        let cfg = RunConfig::new(3, Schedule::Constant { c: 0.5 }, vec![0.0, 0.0], 1);
        assert!(deterministic_md_run(&obj, &g, &cfg, 2.0, &InnerOptions::default()).is_err());
    }
}
