//! Browser demo on two-dimensional Euclidean instances: a heat map of the
//! Bregman stationarity measure, the prox point of a clicked point, and SMD
//! trajectories started there.
//!
//! The `Landscape` methods are plain Rust; the `#[wasm_bindgen]` wrappers only
//! convert errors.

use serde::Serialize;
use smd_core::objective::{make_benchmark, BenchKind, Benchmark, BenchmarkSpec, GeometryKind};
use smd_core::smd::{smd_run, RunConfig, Schedule};
use smd_core::stationarity::{bregman_prox, InnerOptions};
use wasm_bindgen::prelude::*;

/// A 2-D instance together with the prox parameter `lambda = 1/(2 rho)`.
pub struct Landscape {
    bench: Benchmark,
    lambda: f64,
    inner: InnerOptions,
}

#[derive(Debug, Serialize)]
pub struct ProxView {
    pub centre: [f64; 2],
    pub prox_point: [f64; 2],
    pub envelope: f64,
    pub objective: f64,
    pub delta: f64,
    pub grad_map_norm: f64,
    pub iters: usize,
}

#[derive(Debug, Serialize)]
pub struct TrajectoryView {
    /// `x_0, ..., x_{N-1}` flattened as `[x, y, x, y, ...]`.
    pub points: Vec<f64>,
    pub objective: Vec<f64>,
    pub r: usize,
    pub x_r: [f64; 2],
    pub delta_r: f64,
}

impl Landscape {
    pub fn new(name: &str, m: usize, seed: u64) -> Result<Self, String> {
        let kind = BenchKind::from_name(name, 2, m, 0.05, seed).map_err(|e| e.to_string())?;
        if matches!(kind, BenchKind::EntropyToy { .. }) {
            return Err("the demo draws Euclidean instances; entropy-toy needs the simplex".into());
        }
        let bench = make_benchmark(&BenchmarkSpec::new(kind, GeometryKind::Euclidean)).map_err(|e| e.to_string())?;
        let lambda = 0.5 / bench.objective.rho;
        Ok(Self {
            bench,
            lambda,
            inner: InnerOptions::default().with_tol(1e-9),
        })
    }

    pub fn benchmark(&self) -> &Benchmark {
        &self.bench
    }

    fn inside(&self, p: &[f64]) -> bool {
        self.bench.geometry.feasible_set().contains(p, 0.0)
    }

    /// `Delta_{1/(2 rho)}` on a `res x res` grid over `[-w, w]^2`, row-major
    /// from the top-left corner; `NaN` outside the feasible set.
    pub fn stationarity_grid(&self, res: usize, w: f64) -> Result<Vec<f64>, String> {
        if res < 2 || !(w > 0.0) {
            return Err("grid needs res >= 2 and a positive half-width".into());
        }
        let step = 2.0 * w / (res - 1) as f64;
        let mut out = Vec::with_capacity(res * res);
        for i in 0..res {
            let y = w - i as f64 * step;
            for j in 0..res {
                let p = [-w + j as f64 * step, y];
                if !self.inside(&p) {
                    out.push(f64::NAN);
                    continue;
                }
                let r = bregman_prox(&self.bench.objective, &self.bench.geometry, self.lambda, &p, &self.inner)
                    .map_err(|e| e.to_string())?;
                out.push(r.bregman_stat);
            }
        }
        Ok(out)
    }

    pub fn prox(&self, x: f64, y: f64) -> Result<ProxView, String> {
        let z = [x, y];
        let r = bregman_prox(&self.bench.objective, &self.bench.geometry, self.lambda, &z, &self.inner)
            .map_err(|e| e.to_string())?;
        Ok(ProxView {
            centre: z,
            prox_point: [r.prox_point[0], r.prox_point[1]],
            envelope: r.envelope,
            objective: self.bench.objective.value(&z),
            delta: r.bregman_stat,
            grad_map_norm: r.grad_map_norm,
            iters: r.solver_iters,
        })
    }

    pub fn trajectory(&self, x: f64, y: f64, n_iters: usize, c: f64, seed: u64) -> Result<TrajectoryView, String> {
        if n_iters == 0 || n_iters > 100_000 {
            return Err("iterations must be in 1..=100000".into());
        }
        let mut cfg = RunConfig::new(n_iters, Schedule::Constant { c }, vec![x, y], seed);
        cfg.record_every = 1;
        let tr = smd_run(&self.bench.objective, &self.bench.geometry, &cfg).map_err(|e| e.to_string())?;
        let delta_r = bregman_prox(&self.bench.objective, &self.bench.geometry, self.lambda, &tr.x_r, &self.inner)
            .map_err(|e| e.to_string())?
            .bregman_stat;
        Ok(TrajectoryView {
            points: tr.records.iter().flat_map(|r| r.x.iter().copied()).collect(),
            objective: tr.records.iter().map(|r| r.objective).collect(),
            r: tr.r,
            x_r: [tr.x_r[0], tr.x_r[1]],
            delta_r,
        })
    }
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub struct Demo(Landscape);

#[wasm_bindgen]
impl Demo {
    /// `name`: phase-retrieval, sparse-ncvx-regression or quadratic.
    #[wasm_bindgen(constructor)]
    pub fn new(name: &str, m: usize, seed: u64) -> Result<Demo, JsError> {
        Landscape::new(name, m, seed).map(Demo).map_err(js)
    }

    /// The instance as its JSON record.
    pub fn record(&self) -> Result<String, JsError> {
        self.0.bench.to_json().map_err(|e| JsError::new(&e.to_string()))
    }

    pub fn rho(&self) -> f64 {
        self.0.bench.objective.rho
    }

    pub fn radius(&self) -> f64 {
        match self.0.bench.geometry.feasible_set() {
            smd_core::FeasibleSet::Ball { radius, .. } => *radius,
            _ => 3.0,
        }
    }

    #[wasm_bindgen(js_name = stationarityGrid)]
    pub fn stationarity_grid(&self, res: usize, half_width: f64) -> Result<Vec<f64>, JsError> {
        self.0.stationarity_grid(res, half_width).map_err(js)
    }

    pub fn prox(&self, x: f64, y: f64) -> Result<String, JsError> {
        to_json(&self.0.prox(x, y).map_err(js)?)
    }

    pub fn trajectory(&self, x: f64, y: f64, n_iters: usize, c: f64, seed: u64) -> Result<String, JsError> {
        to_json(&self.0.trajectory(x, y, n_iters, c, seed).map_err(js)?)
    }
}
