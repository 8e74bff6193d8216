//! Composite objectives `T = f + r`, stochastic subgradient oracles, and the
//! relative-weak-convexity calculus used to certify the modulus `rho`.

mod benchmarks;
mod losses;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Dgf, Geometry};
use crate::regularizer::Regularizer;
use crate::vecops::{self, dot};

pub use benchmarks::{
    make_benchmark, BenchData, BenchKind, Benchmark, BenchmarkRecord, BenchmarkSpec, GeometryKind, TMin,
};
pub use losses::{EntropyToy, MaxLoss, PhaseRetrieval, Quadratic, SparseNcvxRegression, SumLoss};

/// Random stream handed to oracles. One stream per purpose per trial.
pub type Stream = ChaCha8Rng;

/// Derives the labelled sub-stream `label` of a master seed.
pub fn stream(seed: u64, label: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label);
    rng
}

/// Floor applied to composition moduli that evaluate to zero.
pub const RHO_FLOOR: f64 = 1e-12;

/// The (possibly nonconvex) loss `f` with exact value, a deterministic
/// subgradient and a stochastic oracle.
pub trait Loss: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// A deterministic element of the (relative) subdifferential at `x`.
    fn subgradient(&self, x: &[f64], out: &mut [f64]);
    /// One draw `G(x, xi)` of the unbiased stochastic oracle.
    fn sample_subgradient(&self, x: &[f64], rng: &mut Stream, out: &mut [f64]);
    /// One draw `F(x; xi)` whose mean is `f(x)`. Defaults to the exact value.
    fn sample_value(&self, x: &[f64], _rng: &mut Stream) -> f64 {
        self.value(x)
    }
    /// Continuously differentiable on the relevant domain.
    fn is_smooth(&self) -> bool {
        false
    }
    /// Structure `f = w * sum_i |c_i(x)|` with smooth pieces, if any.
    fn abs_composite(&self) -> Option<&dyn AbsComposite> {
        None
    }
    /// Typical spread of points of interest (used for probing).
    fn sample_scale(&self) -> f64 {
        1.0
    }
    fn describe(&self) -> String;
}

/// `f(x) = weight * sum_i |c_i(x)|` with twice-differentiable `c_i`.
pub trait AbsComposite {
    fn pieces(&self) -> usize;
    fn weight(&self) -> f64;
    fn piece(&self, i: usize, x: &[f64]) -> f64;
    fn piece_grad(&self, i: usize, x: &[f64], out: &mut [f64]);
    fn piece_hess(&self, i: usize, x: &[f64], out: &mut DMatrix<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// `E ||G||_*^2 <= L^2` everywhere on `X`.
    #[default]
    BoundedMoment,
    /// Stochastic relative continuity with constant `L`.
    Src,
}

/// `T = f + r` together with its certified constants.
#[derive(Debug, Clone)]
pub struct CompositeObjective {
    pub loss: Arc<dyn Loss>,
    pub reg: Regularizer,
    pub rho: f64,
    pub lipschitz: f64,
    pub oracle_mode: OracleMode,
}

impl CompositeObjective {
    pub fn new(loss: Arc<dyn Loss>, reg: Regularizer, rho: f64, lipschitz: f64) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::invalid(format!("rho must be finite and >= 0, got {rho}")));
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::invalid(format!("L must be finite and > 0, got {lipschitz}")));
        }
        if reg.l1_weight() < 0.0 {
            return Err(Error::invalid("regularizer must be nonnegative"));
        }
        Ok(Self {
            loss,
            reg,
            rho,
            lipschitz,
            oracle_mode: OracleMode::BoundedMoment,
        })
    }

    pub fn with_mode(mut self, mode: OracleMode) -> Self {
        self.oracle_mode = mode;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn dim(&self) -> usize {
        self.loss.dim()
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        self.loss.value(x)
    }

    /// `T(x) = f(x) + r(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.loss.value(x) + self.reg.value(x)
    }

    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.loss.subgradient(x, &mut g);
        g
    }

    /// Sample-average estimate of `f(x)` for oracle-only losses.
    pub fn estimate_f(&self, x: &[f64], samples: usize, seed: u64) -> f64 {
        let mut rng = stream(seed, 0);
        let s: f64 = (0..samples).map(|_| self.loss.sample_value(x, &mut rng)).sum();
        s / samples as f64
    }
}

/// `partial f(x) = partial (f + rho omega)(x) - rho grad omega(x)`.
pub fn rwc_subgradient(f_plus: &[f64], geom: &Geometry, rho: f64, x: &[f64]) -> Result<Vec<f64>> {
    if !vecops::all_finite(f_plus) || !rho.is_finite() {
        return Err(Error::NumericOverflow("rwc subgradient inputs"));
    }
    let x = geom.interior(x)?;
    let mut g = f_plus.to_vec();
    if rho != 0.0 {
        let go = geom.grad_omega_vec(&x);
        vecops::axpy(-rho, &go, &mut g);
    }
    Ok(g)
}

/// Subgradient `grad g(y)^T w` of `f o g` given `w` in `partial f(g(y))` and
/// the transposed-Jacobian product of the inner map.
pub fn compose_subgradient(w: &[f64], jacobian_t_apply: impl Fn(&[f64], &[f64]) -> Vec<f64>, y: &[f64]) -> Vec<f64> {
    jacobian_t_apply(y, w)
}

/// Relative-weak-convexity modulus `L_f * L_g` of a composition, floored at
/// [`RHO_FLOOR`].
pub fn composition_modulus(outer_lipschitz: f64, inner_smoothness: f64) -> f64 {
    (outer_lipschitz * inner_smoothness).max(RHO_FLOOR)
}

/// Sum rule: `f_1 + f_2 + ...` with moduli `rho_k` relative to `omega_k` is
/// `(sum rho_k)`-RWC relative to the `rho`-weighted blend of the `omega_k`.
pub fn rwc_sum(parts: Vec<(Arc<dyn Loss>, f64, Dgf)>) -> Result<(SumLoss, f64, Dgf)> {
    let rho: f64 = parts.iter().map(|(_, r, _)| r).sum();
    if !(rho > 0.0) {
        return Err(Error::invalid("sum rule needs a positive total modulus"));
    }
    let blend = Dgf::Blend(parts.iter().map(|(_, r, d)| (r / rho, d.clone())).collect());
    let loss = SumLoss::new(parts.into_iter().map(|(l, _, _)| l).collect())?;
    Ok((loss, rho, blend))
}

/// Supremum rule: a finite max of `rho_i`-RWC functions (same reference
/// function) is `max rho_i`-RWC.
pub fn rwc_max(parts: Vec<(Arc<dyn Loss>, f64)>) -> Result<(MaxLoss, f64)> {
    let rho = parts.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    let loss = MaxLoss::new(parts.into_iter().map(|(l, _)| l).collect())?;
    Ok((loss, rho))
}

/// Result of the randomized relative-weak-convexity check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RwcCertificate {
    pub pairs: usize,
    pub rho: f64,
    pub tol: f64,
    /// Largest `f(x) + <g, y-x> - rho D(y,x) - f(y)`; positive means the
    /// lower model is violated.
    pub max_wc_violation: f64,
    /// Largest midpoint-convexity violation of `f + rho omega`.
    pub max_midpoint_violation: f64,
    pub violations: usize,
}

impl RwcCertificate {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Default violation tolerance of [`certify_rwc`].
pub const RWC_TOL: f64 = 1e-8;

/// Randomized check of the lower model
/// `f(y) >= f(x) + <g, y - x> - rho D(y, x)` and of midpoint convexity of
/// `f + rho omega` on `X`. Violations are reported, never fixed.
pub fn certify_rwc(obj: &CompositeObjective, geom: &Geometry, n_pairs: usize, rng: &mut Stream) -> RwcCertificate {
    let loss = &obj.loss;
    let rho = obj.rho;
    let scale = loss.sample_scale();
    let mut g = vec![0.0; geom.dim()];
    let (mut max_wc, mut max_mid) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut violations = 0;
    for k in 0..n_pairs.max(1) {
        let x = if k % 4 == 2 { sample_near_centre(geom, rng, scale) } else { geom.sample_point(rng, scale) };
        let y = if k % 4 == 3 {
            probe_along(geom, &x, &curvature_direction(loss.as_ref(), geom, &x, rng), rng, scale)
        } else {
            probe_near(geom, &x, rng, scale, k)
        };
        loss.subgradient(&x, &mut g);
        let fx = loss.value(&x);
        let fy = loss.value(&y);
        let d = geom.divergence_unchecked(&y, &x);
        let wc = fx + dot(&g, &vecops::sub(&y, &x)) - rho * d - fy;
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let phi = |p: &[f64]| loss.value(p) + rho * geom.omega(p);
        let mp = phi(&mid) - 0.5 * (phi(&x) + phi(&y));
        if wc > RWC_TOL || mp > RWC_TOL {
            violations += 1;
        }
        max_wc = max_wc.max(wc);
        max_mid = max_mid.max(mp);
    }
    RwcCertificate {
        pairs: n_pairs.max(1),
        rho,
        tol: RWC_TOL,
        max_wc_violation: max_wc,
        max_midpoint_violation: max_mid,
        violations,
    }
}

/// Approximate direction of most negative curvature of `f` at `x`: shifted
/// power iteration on central differences of the subgradient. Tangent to the
/// simplex when `X` is one.
fn curvature_direction(loss: &dyn Loss, geom: &Geometry, x: &[f64], rng: &mut Stream) -> Vec<f64> {
    let n = geom.dim();
    let simplex = matches!(geom.feasible_set(), crate::geometry::FeasibleSet::Simplex { .. });
    let tangent = |v: &mut Vec<f64>| {
        if simplex {
            let m = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|a| *a -= m);
        }
        let s = vecops::norm2(v).max(f64::MIN_POSITIVE);
        v.iter_mut().for_each(|a| *a /= s);
    };
    let eps = if simplex {
        1e-3 * x.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        1e-6 * loss.sample_scale()
    };
    let (mut gp, mut gm) = (vec![0.0; n], vec![0.0; n]);
    let mut hess = |v: &[f64]| -> Vec<f64> {
        let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + eps * b).collect();
        let xm: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - eps * b).collect();
        loss.subgradient(&xp, &mut gp);
        loss.subgradient(&xm, &mut gm);
        gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * eps)).collect()
    };
    let mut v = crate::geometry::FeasibleSet::WholeSpace.sample(n, rng, 1.0);
    tangent(&mut v);
    let mut w = v.clone();
    let mut shift = 0.0f64;
    for _ in 0..6 {
        let mut hw = hess(&w);
        shift = shift.max(vecops::norm2(&hw));
        tangent(&mut hw);
        w = hw;
    }
    shift *= 1.5;
    for _ in 0..12 {
        let hv = hess(&v);
        let mut next: Vec<f64> = v.iter().zip(&hv).map(|(a, b)| shift * a - b).collect();
        tangent(&mut next);
        if !vecops::all_finite(&next) {
            break;
        }
        v = next;
    }
    v
}

fn probe_along(geom: &Geometry, x: &[f64], dir: &[f64], rng: &mut Stream, scale: f64) -> Vec<f64> {
    let t = scale * 10f64.powf(-3.0 * rng.random::<f64>());
    let mut y: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + t * d).collect();
    geom.feasible_set().project(&mut y);
    geom.clip_interior(y)
}

/// A point of `X` pulled towards the centre of the set (the origin, or the
/// barycentre of the simplex) by a log-uniform factor in `[1e-3, 1]`, where
/// curvature from many pieces at once tends to concentrate.
fn sample_near_centre(geom: &Geometry, rng: &mut Stream, scale: f64) -> Vec<f64> {
    let x = geom.sample_point(rng, scale);
    let s = 10f64.powf(-3.0 * rng.random::<f64>());
    let y = match geom.feasible_set() {
        crate::geometry::FeasibleSet::Simplex { radius } => {
            let c = radius / geom.dim() as f64;
            x.iter().map(|v| c + s * (v - c)).collect()
        }
        crate::geometry::FeasibleSet::Box { .. } => x,
        _ => x.iter().map(|v| s * v).collect(),
    };
    geom.clip_interior(y)
}

/// A probe point paired with `x`: every third probe is an independent draw,
/// the others are local perturbations at log-uniform scales.
fn probe_near(geom: &Geometry, x: &[f64], rng: &mut Stream, scale: f64, k: usize) -> Vec<f64> {
    if k % 3 == 0 {
        return geom.sample_point(rng, scale);
    }
    let t = scale * 10f64.powf(-3.0 * rng.random::<f64>());
    let dir = crate::geometry::FeasibleSet::WholeSpace.sample(geom.dim(), rng, 1.0);
    let nrm = vecops::norm2(&dir).max(f64::MIN_POSITIVE);
    let mut y: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d / nrm).collect();
    geom.feasible_set().project(&mut y);
    geom.clip_interior(y)
}

/// Empirical second moment of the oracle against `L^2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentReport {
    pub draws: usize,
    pub mean_sq_dual_norm: f64,
    pub bound: f64,
    pub within: bool,
}

/// Checks `mean ||G(x, xi)||_*^2 <= L^2 (1 + slack)`.
pub fn moment_check(
    obj: &CompositeObjective,
    geom: &Geometry,
    x: &[f64],
    n_draws: usize,
    slack: f64,
    rng: &mut Stream,
) -> MomentReport {
    let mut g = vec![0.0; geom.dim()];
    let mut acc = 0.0;
    for _ in 0..n_draws {
        obj.loss.sample_subgradient(x, rng, &mut g);
        acc += geom.dual_norm(&g).powi(2);
    }
    let mean = acc / n_draws as f64;
    let bound = obj.lipschitz * obj.lipschitz;
    MomentReport {
        draws: n_draws,
        mean_sq_dual_norm: mean,
        bound,
        within: mean <= bound * (1.0 + slack),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnbiasednessReport {
    pub draws: usize,
    /// `||mean(G) - g||_2`.
    pub deviation: f64,
    /// `||sd / sqrt(draws)||_2`.
    pub standard_error: f64,
    pub within: bool,
}

/// Compares the oracle mean with the deterministic subgradient at `x`:
/// passes when the deviation is within three aggregate standard errors.
pub fn unbiasedness_check(obj: &CompositeObjective, x: &[f64], n_draws: usize, rng: &mut Stream) -> UnbiasednessReport {
    let n = obj.dim();
    let mut g = vec![0.0; n];
    let mut mean = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    for k in 1..=n_draws {
        obj.loss.sample_subgradient(x, rng, &mut g);
        for i in 0..n {
            let delta = g[i] - mean[i];
            mean[i] += delta / k as f64;
            m2[i] += delta * (g[i] - mean[i]);
        }
    }
    let exact = obj.subgradient(x);
    let deviation = vecops::dist2(&mean, &exact);
    let se: f64 = m2
        .iter()
        .map(|v| v / (n_draws as f64 - 1.0) / n_draws as f64)
        .sum::<f64>()
        .sqrt();
    UnbiasednessReport {
        draws: n_draws,
        deviation,
        standard_error: se,
        within: deviation <= 3.0 * se + 1e-12,
    }
}

/// Outcome of the stochastic-relative-continuity check at one point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrcReport {
    pub draws: usize,
    pub probes: usize,
    /// Estimate of `E ||G(x, xi)||_*^2`.
    pub mean_sq_dual_norm: f64,
    /// 95% confidence half-width of that estimate.
    pub half_width: f64,
    /// `min_y D(y,x) / (0.5 ||y-x||^2)` over the probes.
    pub min_ratio: f64,
    /// `max_y ||y-x||^2 / (2 D(y,x))`, the factor turning `||G||_*` into `M`.
    pub kappa: f64,
    /// Estimate of `E[M^2(x, xi)]`.
    pub m2_estimate: f64,
    pub m2_half_width: f64,
    pub bound: f64,
    pub slack: f64,
    pub exceeds: bool,
}

/// Checks stochastic relative continuity at `x` with generated probes.
pub fn src_moment_check(
    obj: &CompositeObjective,
    geom: &Geometry,
    x: &[f64],
    n_draws: usize,
    rng: &mut Stream,
) -> Result<SrcReport> {
    let scale = obj.loss.sample_scale();
    let probes: Vec<Vec<f64>> = (0..256).map(|k| probe_near(geom, x, rng, scale, k)).collect();
    src_moment_check_with_probes(obj, geom, x, n_draws, &probes, 0.05, rng)
}

/// As [`src_moment_check`] with caller-supplied probe points.
pub fn src_moment_check_with_probes(
    obj: &CompositeObjective,
    geom: &Geometry,
    x: &[f64],
    n_draws: usize,
    probes: &[Vec<f64>],
    slack: f64,
    rng: &mut Stream,
) -> Result<SrcReport> {
    if obj.oracle_mode != OracleMode::Src {
        return Err(Error::invalid("objective is not in SRC oracle mode"));
    }
    let x = geom.interior(x)?.into_owned();
    let mut min_ratio = f64::INFINITY;
    let mut used = 0;
    for y in probes {
        let sq = geom.norm(&vecops::sub(y, &x)).powi(2);
        if sq <= 0.0 {
            continue;
        }
        let d = geom.bregman_divergence(y, &x)?;
        min_ratio = min_ratio.min(d / (0.5 * sq));
        used += 1;
    }
    if used == 0 {
        return Err(Error::InvalidProbe("every probe coincides with x"));
    }
    if n_draws < 2 {
        return Err(Error::invalid("need at least two oracle draws"));
    }
    let mut g = vec![0.0; geom.dim()];
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 1..=n_draws {
        obj.loss.sample_subgradient(&x, rng, &mut g);
        let v = geom.dual_norm(&g).powi(2);
        let delta = v - mean;
        mean += delta / k as f64;
        m2 += delta * (v - mean);
    }
    let sd = (m2 / (n_draws as f64 - 1.0)).sqrt();
    let half_width = 1.96 * sd / (n_draws as f64).sqrt();
    let kappa = 1.0 / min_ratio;
    let bound = obj.lipschitz * obj.lipschitz;
    let m2_estimate = mean * kappa;
    Ok(SrcReport {
        draws: n_draws,
        probes: used,
        mean_sq_dual_norm: mean,
        half_width,
        min_ratio,
        kappa,
        m2_estimate,
        m2_half_width: half_width * kappa,
        bound,
        slack,
        exceeds: m2_estimate > bound * (1.0 + slack),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FeasibleSet;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rwc_subgradient_with_zero_rho_is_identity() {
        let geom = Geometry::euclidean(3, FeasibleSet::WholeSpace).unwrap();
        let g = rwc_subgradient(&[1.0, -2.0, 3.0], &geom, 0.0, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(g, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn negative_entropy_subgradient_is_minus_mirror_map() {
        // f = -sum x log x, so f + omega = 0 and the convex part contributes 0.
        let geom = Geometry::entropy_simplex(3, 1.0).unwrap();
        let x = [0.2, 0.3, 0.5];
        let g = rwc_subgradient(&[0.0; 3], &geom, 1.0, &x).unwrap();
        for (gi, xi) in g.iter().zip(&x) {
            assert_abs_diff_eq!(*gi, -(xi.ln() + 1.0), epsilon = 1e-15);
        }
        // Agrees with the loss's own subgradient for c = 0.
        let toy = EntropyToy::new(vec![0.0; 3], 0.0, geom.boundary_eps());
        let mut own = vec![0.0; 3];
        toy.subgradient(&x, &mut own);
        for (a, b) in g.iter().zip(&own) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn linear_inner_map_composition() {
        // f = identity on R, g(y) = <a, y>: subgradient is a, modulus floored.
        let a = [1.5, -0.5];
        let s = compose_subgradient(&[1.0], |_, w| a.iter().map(|ai| ai * w[0]).collect(), &[0.3, 0.4]);
        assert_eq!(s, vec![1.5, -0.5]);
        assert_eq!(composition_modulus(1.0, 0.0), RHO_FLOOR);
        assert_eq!(composition_modulus(2.0, 3.0), 6.0);
    }

    #[test]
    fn convex_function_certifies_with_zero_rho() {
        let geom = Geometry::euclidean(3, FeasibleSet::WholeSpace).unwrap();
        let q = Quadratic::new(1.0, vec![0.5, -0.2, 0.1], 0.0);
        let obj = CompositeObjective::new(Arc::new(q), Regularizer::Zero, 0.0, 1.0).unwrap();
        let cert = certify_rwc(&obj, &geom, 500, &mut stream(1, 0));
        assert!(cert.passed(), "{cert:?}");
    }

    #[test]
    fn concave_quadratic_needs_its_modulus() {
        let geom = Geometry::euclidean(3, FeasibleSet::WholeSpace).unwrap();
        let q = Arc::new(Quadratic::new(-2.0, vec![0.0; 3], 0.0));
        let ok = CompositeObjective::new(q.clone(), Regularizer::Zero, 2.0, 1.0).unwrap();
        assert!(certify_rwc(&ok, &geom, 300, &mut stream(2, 0)).passed());
        let bad = ok.with_rho(1.0);
        assert!(!certify_rwc(&bad, &geom, 300, &mut stream(2, 0)).passed());
    }

    #[test]
    fn src_check_rejects_degenerate_probes() {
        let geom = Geometry::euclidean(2, FeasibleSet::WholeSpace).unwrap();
        let q = Arc::new(Quadratic::new(1.0, vec![0.0; 2], 0.0));
        let obj = CompositeObjective::new(q, Regularizer::Zero, 1.0, 10.0)
            .unwrap()
            .with_mode(OracleMode::Src);
        let x = vec![0.3, 0.4];
        let err = src_moment_check_with_probes(&obj, &geom, &x, 10, &[x.clone()], 0.05, &mut stream(0, 0));
        assert!(matches!(err, Err(Error::InvalidProbe(_))));
    }

    #[test]
    fn src_ratio_is_one_in_euclidean_geometry() {
        let geom = Geometry::euclidean(2, FeasibleSet::WholeSpace).unwrap();
        let q = Arc::new(Quadratic::new(1.0, vec![0.0; 2], 0.0));
        let obj = CompositeObjective::new(q, Regularizer::Zero, 1.0, 10.0)
            .unwrap()
            .with_mode(OracleMode::Src);
        let rep = src_moment_check(&obj, &geom, &[0.3, 0.4], 16, &mut stream(0, 1)).unwrap();
        assert_abs_diff_eq!(rep.min_ratio, 1.0, epsilon = 1e-12);
        // Zero-variance oracle: estimate is exactly ||g||^2 * kappa.
        assert_abs_diff_eq!(rep.m2_estimate, 0.25 * rep.kappa, epsilon = 1e-15);
        assert_eq!(rep.half_width, 0.0);
    }

    #[test]
    fn src_ratio_dominates_one_under_entropy() {
        let geom = Geometry::entropy_simplex(4, 1.0).unwrap();
        let toy = Arc::new(EntropyToy::new(vec![0.1, 0.2, 0.3, 0.4], 0.5, geom.boundary_eps()));
        let obj = CompositeObjective::new(toy, Regularizer::Zero, 1.0, 30.0)
            .unwrap()
            .with_mode(OracleMode::Src);
        let rep = src_moment_check(&obj, &geom, &[0.1, 0.2, 0.3, 0.4], 1000, &mut stream(0, 2)).unwrap();
        assert!(rep.min_ratio >= 1.0 - 1e-12, "{rep:?}");
        assert!(!rep.exceeds);
    }

    #[test]
    fn stream_labels_are_independent() {
        let mut a = stream(7, 1);
        let mut b = stream(7, 2);
        let mut a2 = stream(7, 1);
        let x: u64 = a.random();
        assert_ne!(x, b.random::<u64>());
        assert_eq!(x, a2.random::<u64>());
    }
}
