//! Bregman proximal operator, Bregman Moreau envelope and the stationarity
//! measures `G_lambda` and `Delta_lambda`.
//!
//! For `lambda * rho < 1` the prox objective
//! `Phi(x) = T(x) + D(x, z) / lambda` is `(1/lambda - rho)`-strongly convex
//! relative to `omega`, so its minimiser is unique.

mod inner;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::objective::CompositeObjective;
use crate::vecops;

/// Which inner method produced the prox point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxMethod {
    /// Bregman proximal gradient with backtracking (smooth `f`).
    BregmanGradient,
    /// Newton on a smoothing of `|c_i|` with continuation (`f = w sum |c_i|`).
    SmoothedNewton,
    /// Relative-strong-convexity mirror descent with weighted averaging.
    MirrorDescent,
    /// The centre itself was the best candidate found.
    Centre,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Try the smoothed Newton path when the loss exposes its structure.
    pub newton: bool,
    /// Fail (instead of flagging `converged = false`) when the budget runs out.
    pub strict: bool,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tol: 1e-10,
            newton: true,
            strict: false,
        }
    }
}

impl InnerOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// `prox_{lambda T}(z)` and the quantities derived from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProxResult {
    pub lambda: f64,
    /// The (interior-clipped) centre `z`.
    pub centre: Vec<f64>,
    pub prox_point: Vec<f64>,
    /// `T_lambda(z) = T(x_hat) + D(x_hat, z) / lambda`.
    pub envelope: f64,
    /// `G_lambda(z) = (z - x_hat) / lambda`.
    pub grad_map: Vec<f64>,
    /// `||G_lambda(z)||` in the primal norm of the geometry.
    pub grad_map_norm: f64,
    /// `Delta_lambda(z) = (D(z, x_hat) + D(x_hat, z)) / lambda^2`.
    pub bregman_stat: f64,
    pub solver_iters: usize,
    pub residual: f64,
    pub method: ProxMethod,
    pub converged: bool,
}

impl ProxResult {
    fn assemble(
        obj: &CompositeObjective,
        geom: &Geometry,
        lambda: f64,
        z: Vec<f64>,
        x: Vec<f64>,
        diag: inner::Diagnostics,
    ) -> Result<Self> {
        let d_xz = geom.divergence_unchecked(&x, &z).max(0.0);
        let d_zx = geom.divergence_unchecked(&z, &x).max(0.0);
        let envelope = obj.value(&x) + d_xz / lambda;
        let grad_map: Vec<f64> = z.iter().zip(&x).map(|(a, b)| (a - b) / lambda).collect();
        let bregman_stat = (d_zx + d_xz) / (lambda * lambda);
        if !envelope.is_finite() || !bregman_stat.is_finite() || !vecops::all_finite(&grad_map) {
            return Err(Error::ProxSolverFailure {
                best: x,
                residual: diag.residual,
            });
        }
        Ok(Self {
            lambda,
            grad_map_norm: geom.norm(&grad_map),
            centre: z,
            prox_point: x,
            envelope,
            grad_map,
            bregman_stat,
            solver_iters: diag.iters,
            residual: diag.residual,
            method: diag.method,
            converged: diag.converged,
        })
    }

    /// `||G||^2 <= Delta` holds up to rounding for every 1-strongly convex `omega`.
    pub fn ordering_gap(&self) -> f64 {
        self.bregman_stat - self.grad_map_norm.powi(2)
    }
}

fn check_lambda(obj: &CompositeObjective, lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let product = lambda * obj.rho;
    if product >= 1.0 {
        return Err(Error::IllPosedProx { product });
    }
    Ok(())
}

/// `prox_{lambda T}(z)` warm-started from `z`.
pub fn bregman_prox(
    obj: &CompositeObjective,
    geom: &Geometry,
    lambda: f64,
    z: &[f64],
    opts: &InnerOptions,
) -> Result<ProxResult> {
    bregman_prox_from(obj, geom, lambda, z, z, opts)
}

/// `prox_{lambda T}(z)` warm-started from `start`.
pub fn bregman_prox_from(
    obj: &CompositeObjective,
    geom: &Geometry,
    lambda: f64,
    z: &[f64],
    start: &[f64],
    opts: &InnerOptions,
) -> Result<ProxResult> {
    check_lambda(obj, lambda)?;
    if obj.dim() != geom.dim() {
        return Err(Error::DimensionMismatch {
            expected: geom.dim(),
            got: obj.dim(),
        });
    }
    let z = geom.interior(z)?.into_owned();
    let start = geom.interior(start)?.into_owned();
    let (x, diag) = inner::solve(obj, geom, lambda, &z, start, opts);
    if !vecops::all_finite(&x) {
        return Err(Error::ProxSolverFailure {
            best: x,
            residual: diag.residual,
        });
    }
    if opts.strict && !diag.converged {
        return Err(Error::ProxSolverFailure {
            best: x,
            residual: diag.residual,
        });
    }
    ProxResult::assemble(obj, geom, lambda, z, x, diag)
}

/// `G` and `Delta` at `z` with `lambda = 1 / rho_hat`.
pub fn stationarity_at(obj: &CompositeObjective, geom: &Geometry, rho_hat: f64, z: &[f64], opts: &InnerOptions) -> Result<ProxResult> {
    if !(rho_hat > obj.rho) {
        return Err(Error::invalid(format!("rho_hat = {rho_hat} must exceed rho = {}", obj.rho)));
    }
    bregman_prox(obj, geom, 1.0 / rho_hat, z, opts)
}

/// `grad T_lambda(z) = grad^2 omega(z) (z - x_hat) / lambda`.
pub fn envelope_gradient_diag(
    obj: &CompositeObjective,
    geom: &Geometry,
    lambda: f64,
    z: &[f64],
    opts: &InnerOptions,
) -> Result<Vec<f64>> {
    if !geom.supports_hessian() {
        return Err(Error::UnsupportedDiagnostic("reference function has no Hessian-apply"));
    }
    let p = bregman_prox(obj, geom, lambda, z, opts)?;
    let mut out = vec![0.0; geom.dim()];
    geom.hessian_apply(&p.centre, &p.grad_map, &mut out)?;
    Ok(out)
}
