//! Distance-generating functions, Bregman divergences, norms, feasible sets
//! and the mirror-step subproblem
//!
//! ```text
//! x+ = argmin_{x in X} <g, x> + r(x) + (1/alpha) D(x, x_t)
//! ```
//!
//! Two reference functions ship with closed-form mirror steps: the squared
//! Euclidean norm (any feasible set, via Euclidean prox/projection) and the
//! negative entropy on a simplex (multiplicative weights). Blended and
//! user-supplied reference functions go through a generic inner solver.

use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regularizer::Regularizer;
use crate::vecops::{self, dot, norm1, norm2, norm_inf, soft_threshold};

/// Default interior clipping margin for reference functions whose gradient
/// diverges on the boundary.
pub const BOUNDARY_EPS: f64 = 1e-12;

/// Iteration budget of the generic mirror-step solver.
pub const STEP_SOLVER_BUDGET: usize = 500;
/// Successive-iterate tolerance of the generic mirror-step solver.
pub const STEP_SOLVER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    L2,
    LInf,
}

impl NormKind {
    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            NormKind::L1 => norm1(v),
            NormKind::L2 => norm2(v),
            NormKind::LInf => norm_inf(v),
        }
    }

    pub fn dual(self) -> NormKind {
        match self {
            NormKind::L1 => NormKind::LInf,
            NormKind::L2 => NormKind::L2,
            NormKind::LInf => NormKind::L1,
        }
    }
}

/// A closed convex set `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeasibleSet {
    WholeSpace,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Simplex { radius: f64 },
    Ball { norm: NormKind, radius: f64 },
}

impl FeasibleSet {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            FeasibleSet::WholeSpace => Ok(()),
            FeasibleSet::Box { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: lower.len().min(upper.len()),
                    });
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return Err(Error::invalid("box has lower > upper (empty set)"));
                }
                Ok(())
            }
            FeasibleSet::Simplex { radius } | FeasibleSet::Ball { radius, .. } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::invalid("radius must be positive and finite"));
                }
                Ok(())
            }
        }
    }

    fn scale(&self) -> f64 {
        match self {
            FeasibleSet::Simplex { radius } | FeasibleSet::Ball { radius, .. } => radius.max(1.0),
            _ => 1.0,
        }
    }

    /// Membership test with an absolute tolerance.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            FeasibleSet::WholeSpace => true,
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            FeasibleSet::Simplex { radius } => {
                x.iter().all(|v| *v >= -tol)
                    && (x.iter().sum::<f64>() - radius).abs() <= tol * x.len() as f64
            }
            FeasibleSet::Ball { norm, radius } => norm.eval(x) <= radius + tol,
        }
    }

    /// Euclidean prox of `t * ||.||_1 + indicator(X)` at `v`, in place.
    ///
    /// For every shipped set this is a closed form: the l1 term is constant
    /// on the simplex, separable on boxes, and commutes with the radial
    /// shrinkage of l1/l2 balls.
    pub fn prox_l1(&self, v: &mut [f64], t: f64) {
        if t > 0.0 && !matches!(self, FeasibleSet::Simplex { .. }) {
            for vi in v.iter_mut() {
                *vi = soft_threshold(*vi, t);
            }
        }
        self.project(v);
    }

    /// Euclidean projection onto the set, in place.
    pub fn project(&self, v: &mut [f64]) {
        match self {
            FeasibleSet::WholeSpace => {}
            FeasibleSet::Box { lower, upper } => {
                for ((vi, l), u) in v.iter_mut().zip(lower).zip(upper) {
                    *vi = vi.clamp(*l, *u);
                }
            }
            FeasibleSet::Simplex { radius } => project_simplex(v, *radius),
            FeasibleSet::Ball { norm, radius } => match norm {
                NormKind::L2 => {
                    let nrm = norm2(v);
                    if nrm > *radius {
                        let s = radius / nrm;
                        v.iter_mut().for_each(|x| *x *= s);
                    }
                }
                NormKind::LInf => v.iter_mut().for_each(|x| *x = x.clamp(-radius, *radius)),
                NormKind::L1 => project_l1_ball(v, *radius),
            },
        }
    }

    /// Draws a point of the set. `scale` sets the spread on unbounded sets.
    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R, scale: f64) -> Vec<f64> {
        match self {
            FeasibleSet::WholeSpace => (0..dim)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            FeasibleSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| {
                    let (l, u) = (l.max(-scale * 10.0), u.min(scale * 10.0));
                    l + (u - l) * rng.random::<f64>()
                })
                .collect(),
            FeasibleSet::Simplex { radius } => {
                let mut e: Vec<f64> = (0..dim).map(|_| Exp1.sample(rng)).collect();
                let s: f64 = e.iter().sum();
                e.iter_mut().for_each(|v| *v *= radius / s);
                e
            }
            FeasibleSet::Ball { norm, radius } => {
                let u: f64 = rng.random::<f64>().powf(1.0 / dim as f64);
                match norm {
                    NormKind::L2 => {
                        let mut d: Vec<f64> =
                            (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                        let n = norm2(&d).max(f64::MIN_POSITIVE);
                        d.iter_mut().for_each(|v| *v *= radius * u / n);
                        d
                    }
                    NormKind::L1 => {
                        let mut e: Vec<f64> = (0..dim).map(|_| Exp1.sample(rng)).collect();
                        let s: f64 = e.iter().sum();
                        for v in e.iter_mut() {
                            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                            *v *= sign * radius * u / s;
                        }
                        e
                    }
                    NormKind::LInf => (0..dim)
                        .map(|_| radius * (2.0 * rng.random::<f64>() - 1.0))
                        .collect(),
                }
            }
        }
    }
}

/// Euclidean projection onto `{x >= 0, sum x = radius}` (sort-based).
pub fn project_simplex(v: &mut [f64], radius: f64) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - radius) / (j + 1) as f64;
        if *uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

fn project_l1_ball(v: &mut [f64], radius: f64) {
    if norm1(v) <= radius {
        return;
    }
    let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    project_simplex(&mut a, radius);
    for (vi, ai) in v.iter_mut().zip(a) {
        *vi = vi.signum() * ai;
    }
}

/// A user-supplied reference function. Users provide the gradient; no
/// automatic differentiation is attempted.
pub trait CustomDgf: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// Norm with respect to which the function is 1-strongly convex.
    fn norm(&self) -> NormKind;
    /// Whether the gradient needs strictly interior (clipped) points.
    fn needs_interior(&self) -> bool {
        false
    }
    /// Hessian-vector product. `None` when not available.
    fn hessian_apply(&self, _x: &[f64], _v: &[f64], _out: &mut [f64]) -> Option<()> {
        None
    }
}

/// Reference (distance-generating) function.
#[derive(Debug, Clone)]
pub enum Dgf {
    /// `0.5 * ||x||_2^2`, 1-strongly convex w.r.t. l2.
    Euclidean,
    /// `R * sum x_i log x_i` on the simplex of radius `R`, 1-strongly convex
    /// w.r.t. l1.
    Entropy,
    /// Convex combination `sum w_k omega_k` of reference functions
    /// (weights are normalised at construction).
    Blend(Vec<(f64, Dgf)>),
    Custom(Arc<dyn CustomDgf>),
}

impl Dgf {
    fn needs_interior(&self) -> bool {
        match self {
            Dgf::Euclidean => false,
            Dgf::Entropy => true,
            Dgf::Blend(parts) => parts.iter().any(|(_, d)| d.needs_interior()),
            Dgf::Custom(c) => c.needs_interior(),
        }
    }

    fn uses_entropy(&self) -> bool {
        match self {
            Dgf::Entropy => true,
            Dgf::Blend(parts) => parts.iter().any(|(_, d)| d.uses_entropy()),
            _ => false,
        }
    }

    fn norm(&self) -> NormKind {
        match self {
            Dgf::Euclidean => NormKind::L2,
            Dgf::Entropy => NormKind::L1,
            // A convex combination is 1-strongly convex w.r.t. the weakest
            // of the component norms (l2 <= l1 on R^n).
            Dgf::Blend(parts) => {
                if parts.iter().any(|(_, d)| d.norm() != NormKind::L1) {
                    NormKind::L2
                } else {
                    NormKind::L1
                }
            }
            Dgf::Custom(c) => c.norm(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Dgf::Euclidean => "euclidean".into(),
            Dgf::Entropy => "entropy".into(),
            Dgf::Blend(parts) => {
                let inner: Vec<String> = parts
                    .iter()
                    .map(|(w, d)| format!("{w:.4}*{}", d.name()))
                    .collect();
                format!("blend({})", inner.join("+"))
            }
            Dgf::Custom(c) => format!("custom({c:?})"),
        }
    }
}

/// Everything needed to form Bregman divergences and solve mirror steps.
///
/// Immutable after construction; cheap to clone.
#[derive(Debug, Clone)]
pub struct Geometry {
    dim: usize,
    set: FeasibleSet,
    dgf: Dgf,
    boundary_eps: f64,
}

impl Geometry {
    pub fn new(dim: usize, set: FeasibleSet, dgf: Dgf) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        set.validate(dim)?;
        let dgf = match dgf {
            Dgf::Blend(parts) => {
                if parts.is_empty() || parts.iter().any(|(w, _)| !(*w >= 0.0 && w.is_finite())) {
                    return Err(Error::invalid("blend weights must be nonnegative and finite"));
                }
                let total: f64 = parts.iter().map(|(w, _)| w).sum();
                if total <= 0.0 {
                    return Err(Error::invalid("blend weights sum to zero"));
                }
                Dgf::Blend(parts.into_iter().map(|(w, d)| (w / total, d)).collect())
            }
            other => other,
        };
        if dgf.uses_entropy() && !matches!(set, FeasibleSet::Simplex { .. }) {
            return Err(Error::invalid("entropy reference function requires a simplex feasible set"));
        }
        Ok(Self {
            dim,
            set,
            dgf,
            boundary_eps: BOUNDARY_EPS,
        })
    }

    pub fn euclidean(dim: usize, set: FeasibleSet) -> Result<Self> {
        Self::new(dim, set, Dgf::Euclidean)
    }

    pub fn entropy_simplex(dim: usize, radius: f64) -> Result<Self> {
        Self::new(dim, FeasibleSet::Simplex { radius }, Dgf::Entropy)
    }

    pub fn with_boundary_eps(mut self, eps: f64) -> Self {
        assert!(eps > 0.0 && eps < 1e-2);
        self.boundary_eps = eps;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn dgf(&self) -> &Dgf {
        &self.dgf
    }

    pub fn boundary_eps(&self) -> f64 {
        self.boundary_eps
    }

    pub fn name(&self) -> String {
        self.dgf.name()
    }

    pub fn norm_kind(&self) -> NormKind {
        self.dgf.norm()
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        self.norm_kind().eval(v)
    }

    pub fn dual_norm(&self, g: &[f64]) -> f64 {
        self.norm_kind().dual().eval(g)
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.dgf, Dgf::Euclidean)
    }

    pub fn needs_interior(&self) -> bool {
        self.dgf.needs_interior()
    }

    fn entropy_scale(&self) -> f64 {
        match self.set {
            FeasibleSet::Simplex { radius } => radius,
            _ => 1.0,
        }
    }

    fn tol(&self) -> f64 {
        1e-9 * self.set.scale()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Checks `x` is in `X` (up to a small absolute tolerance).
    pub fn check_member(&self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        if !vecops::all_finite(x) {
            return Err(Error::NumericOverflow("point coordinates"));
        }
        if !self.set.contains(x, self.tol()) {
            return Err(Error::InfeasiblePoint(format!(
                "point not in {:?}",
                self.set
            )));
        }
        Ok(())
    }

    /// Returns `y` moved into the region where the reference gradient is
    /// finite: coordinates below `boundary_eps` are clipped and the point
    /// renormalised. Points that are genuinely outside `X` are rejected.
    pub fn interior<'a>(&self, y: &'a [f64]) -> Result<Cow<'a, [f64]>> {
        self.check_dim(y)?;
        if !vecops::all_finite(y) {
            return Err(Error::NumericOverflow("point coordinates"));
        }
        if !self.needs_interior() {
            self.check_member(y)?;
            return Ok(Cow::Borrowed(y));
        }
        let tol = self.tol();
        if let Some((index, &value)) = y.iter().enumerate().find(|(_, v)| **v < -tol) {
            return Err(Error::BoundaryPoint { index, value });
        }
        let radius = self.entropy_scale();
        let sum: f64 = y.iter().sum();
        if (sum - radius).abs() > tol * self.dim as f64 {
            return Err(Error::InfeasiblePoint(format!(
                "coordinates sum to {sum}, expected {radius}"
            )));
        }
        let eps = self.boundary_eps * radius;
        if y.iter().all(|v| *v >= eps) {
            return Ok(Cow::Borrowed(y));
        }
        Ok(Cow::Owned(self.clip_interior(y.to_vec())))
    }

    /// Clips coordinates to `boundary_eps` and renormalises (no validation).
    pub(crate) fn clip_interior(&self, mut y: Vec<f64>) -> Vec<f64> {
        if !self.needs_interior() {
            return y;
        }
        let radius = self.entropy_scale();
        let eps = self.boundary_eps * radius;
        y.iter_mut().for_each(|v| *v = v.max(eps));
        let s: f64 = y.iter().sum();
        y.iter_mut().for_each(|v| *v *= radius / s);
        y
    }

    /// The reference function value `omega(x)`.
    pub fn omega(&self, x: &[f64]) -> f64 {
        self.omega_of(&self.dgf, x)
    }

    fn omega_of(&self, dgf: &Dgf, x: &[f64]) -> f64 {
        match dgf {
            Dgf::Euclidean => 0.5 * dot(x, x),
            Dgf::Entropy => {
                self.entropy_scale()
                    * x.iter()
                        .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
                        .sum::<f64>()
            }
            Dgf::Blend(parts) => parts.iter().map(|(w, d)| w * self.omega_of(d, x)).sum(),
            Dgf::Custom(c) => c.value(x),
        }
    }

    /// `grad omega(x)` written into `out`. Callers pass interior points.
    pub fn grad_omega(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.grad_of(&self.dgf, 1.0, x, out);
    }

    fn grad_of(&self, dgf: &Dgf, weight: f64, x: &[f64], out: &mut [f64]) {
        match dgf {
            Dgf::Euclidean => vecops::axpy(weight, x, out),
            Dgf::Entropy => {
                let s = weight * self.entropy_scale();
                for (o, &v) in out.iter_mut().zip(x) {
                    *o += s * (v.ln() + 1.0);
                }
            }
            Dgf::Blend(parts) => {
                for (w, d) in parts {
                    self.grad_of(d, weight * w, x, out);
                }
            }
            Dgf::Custom(c) => {
                let mut tmp = vec![0.0; x.len()];
                c.gradient(x, &mut tmp);
                vecops::axpy(weight, &tmp, out);
            }
        }
    }

    pub fn grad_omega_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.grad_omega(x, &mut g);
        g
    }

    /// Hessian-vector product `grad^2 omega(x) v`.
    pub fn hessian_apply(&self, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.hess_of(&self.dgf, 1.0, x, v, out)
    }

    pub fn supports_hessian(&self) -> bool {
        fn walk(d: &Dgf, x: &[f64]) -> bool {
            match d {
                Dgf::Euclidean | Dgf::Entropy => true,
                Dgf::Blend(parts) => parts.iter().all(|(_, d)| walk(d, x)),
                Dgf::Custom(c) => {
                    let mut out = vec![0.0; x.len()];
                    c.hessian_apply(x, x, &mut out).is_some()
                }
            }
        }
        let probe = match self.set {
            FeasibleSet::Simplex { radius } => vec![radius / self.dim as f64; self.dim],
            _ => vec![0.0; self.dim],
        };
        walk(&self.dgf, &probe)
    }

    fn hess_of(&self, dgf: &Dgf, weight: f64, x: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        match dgf {
            Dgf::Euclidean => vecops::axpy(weight, v, out),
            Dgf::Entropy => {
                let s = weight * self.entropy_scale();
                for ((o, xi), vi) in out.iter_mut().zip(x).zip(v) {
                    *o += s * vi / xi;
                }
            }
            Dgf::Blend(parts) => {
                for (w, d) in parts {
                    self.hess_of(d, weight * w, x, v, out)?;
                }
            }
            Dgf::Custom(c) => {
                let mut tmp = vec![0.0; x.len()];
                c.hessian_apply(x, v, &mut tmp)
                    .ok_or(Error::UnsupportedDiagnostic("custom reference function has no Hessian"))?;
                vecops::axpy(weight, &tmp, out);
            }
        }
        Ok(())
    }

    /// `D(x, y) = omega(x) - omega(y) - <grad omega(y), x - y>` for `x` in
    /// `X` and `y` interior. Computed without validation; see
    /// [`bregman_divergence`](Self::bregman_divergence).
    pub(crate) fn divergence_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.div_of(&self.dgf, x, y)
    }

    fn div_of(&self, dgf: &Dgf, x: &[f64], y: &[f64]) -> f64 {
        match dgf {
            Dgf::Euclidean => 0.5 * vecops::dist2(x, y).powi(2),
            Dgf::Entropy => {
                let d: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(&xi, &yi)| {
                        if xi > 0.0 {
                            xi * (xi / yi).ln() - xi + yi
                        } else {
                            yi
                        }
                    })
                    .sum();
                self.entropy_scale() * d.max(0.0)
            }
            Dgf::Blend(parts) => parts.iter().map(|(w, d)| w * self.div_of(d, x, y)).sum(),
            Dgf::Custom(c) => {
                let mut g = vec![0.0; y.len()];
                c.gradient(y, &mut g);
                c.value(x) - c.value(y) - dot(&g, &vecops::sub(x, y))
            }
        }
    }

    /// Bregman divergence `D(x, y)`.
    pub fn bregman_divergence(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_member(x)?;
        let y = self.interior(y)?;
        let d = self.divergence_unchecked(x, &y);
        if !d.is_finite() {
            return Err(Error::NumericOverflow("Bregman divergence"));
        }
        Ok(d.max(0.0))
    }

    /// Residual of the three-point identity
    /// `D(x,y) + D(y,z) - D(x,z) - <grad omega(z) - grad omega(y), x - y>`.
    pub fn three_point_residual(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
        let dxy = self.bregman_divergence(x, y)?;
        let y = self.interior(y)?;
        let dyz = self.bregman_divergence(&y, z)?;
        let dxz = self.bregman_divergence(x, z)?;
        let z = self.interior(z)?;
        let gz = self.grad_omega_vec(&z);
        let gy = self.grad_omega_vec(&y);
        let diff = vecops::sub(&gz, &gy);
        let r = dxy + dyz - dxz - dot(&diff, &vecops::sub(x, &y));
        if !r.is_finite() {
            return Err(Error::NumericOverflow("three-point residual"));
        }
        Ok(r)
    }

    /// Solves `argmin_{x in X} <g, x> + r(x) + (1/alpha) D(x, x_t)`.
    pub fn mirror_step(&self, x_t: &[f64], g: &[f64], alpha: f64, reg: &Regularizer) -> Result<Vec<f64>> {
        self.check_dim(g)?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("step size must be positive, got {alpha}")));
        }
        if !vecops::all_finite(g) {
            return Err(Error::NumericOverflow("mirror-step gradient"));
        }
        let xt = self.interior(x_t)?;
        let out = match &self.dgf {
            Dgf::Euclidean => {
                let mut v: Vec<f64> = xt.iter().zip(g).map(|(x, gi)| x - alpha * gi).collect();
                self.set.prox_l1(&mut v, alpha * reg.l1_weight());
                v
            }
            // The l1 term is constant on the simplex.
            Dgf::Entropy => self.entropy_step(&xt, g, alpha),
            _ => return self.mirror_step_generic(&xt, g, alpha, reg),
        };
        if !vecops::all_finite(&out) {
            return Err(Error::NumericOverflow("mirror step"));
        }
        Ok(out)
    }

    /// Multiplicative-weights update `x+ ~ x_t * exp(-alpha g / R)`.
    fn entropy_step(&self, xt: &[f64], g: &[f64], alpha: f64) -> Vec<f64> {
        let radius = self.entropy_scale();
        let logits: Vec<f64> = xt
            .iter()
            .zip(g)
            .map(|(x, gi)| x.ln() - alpha * gi / radius)
            .collect();
        let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v *= radius / s);
        self.clip_interior(w)
    }

    /// The generic inner solver for the mirror step, available for every
    /// geometry (used directly when no closed form applies).
    pub fn mirror_step_generic(&self, x_t: &[f64], g: &[f64], alpha: f64, reg: &Regularizer) -> Result<Vec<f64>> {
        let xt = self.interior(x_t)?.into_owned();
        let grad_t = self.grad_omega_vec(&xt);
        let mut gw = vec![0.0; self.dim];
        let mut smooth = |x: &[f64], grad: &mut [f64]| -> f64 {
            self.grad_omega(x, &mut gw);
            for i in 0..x.len() {
                grad[i] = g[i] + (gw[i] - grad_t[i]) / alpha;
            }
            dot(g, x) + self.divergence_unchecked(x, &xt) / alpha
        };
        let outcome = proximal_gradient(
            self,
            reg.l1_weight(),
            &mut smooth,
            xt.clone(),
            alpha,
            STEP_SOLVER_BUDGET,
            STEP_SOLVER_TOL,
        );
        if !outcome.converged {
            return Err(Error::StepSolverFailure {
                best: outcome.x,
                residual: outcome.residual,
                iterations: outcome.iters,
            });
        }
        Ok(outcome.x)
    }

    /// Gap in the three-point inequality
    /// `phi(x) + D(x,z)/alpha - [phi(z+) + D(z+,z)/alpha + D(x,z+)/alpha]`,
    /// which is nonnegative when `z+` is the exact mirror-step solution.
    pub fn three_point_inequality_gap(
        &self,
        phi: impl Fn(&[f64]) -> f64,
        alpha: f64,
        z: &[f64],
        z_plus: &[f64],
        x: &[f64],
    ) -> Result<f64> {
        let lhs = phi(x) + self.bregman_divergence(x, z)? / alpha;
        let rhs = phi(z_plus)
            + self.bregman_divergence(z_plus, z)? / alpha
            + self.bregman_divergence(x, z_plus)? / alpha;
        Ok(lhs - rhs)
    }

    /// The point `y` with `grad omega(y) = (wa grad omega(a) + wb grad omega(b)) / (wa + wb)`
    /// (up to a multiple of the all-ones vector on the simplex), so that
    /// `wa D(x,a) + wb D(x,b) = (wa + wb) D(x,y) + const`. `None` when the
    /// reference function has no closed-form mirror map.
    pub(crate) fn mirror_average(&self, a: &[f64], wa: f64, b: &[f64], wb: f64) -> Option<Vec<f64>> {
        let s = wa + wb;
        match self.dgf {
            Dgf::Euclidean => Some(a.iter().zip(b).map(|(u, v)| (wa * u + wb * v) / s).collect()),
            Dgf::Entropy => {
                let logs: Vec<f64> = a.iter().zip(b).map(|(u, v)| (wa * u.ln() + wb * v.ln()) / s).collect();
                let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut y: Vec<f64> = logs.iter().map(|l| (l - mx).exp()).collect();
                let radius = self.entropy_scale();
                let t: f64 = y.iter().sum();
                y.iter_mut().for_each(|v| *v *= radius / t);
                Some(self.clip_interior(y))
            }
            _ => None,
        }
    }

    /// Draws a point of `X` that is valid as a divergence centre.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Vec<f64> {
        self.clip_interior(self.set.sample(self.dim, rng, scale))
    }
}

pub(crate) struct PgOutcome {
    pub x: Vec<f64>,
    pub iters: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Accelerated proximal gradient with backtracking and gradient-based
/// restarts on `smooth(x) + l1 * ||x||_1` over `X`, using the Euclidean prox
/// of the nonsmooth part. Iterates and extrapolated points are kept interior
/// for reference functions that need it.
pub(crate) fn proximal_gradient(
    geom: &Geometry,
    l1: f64,
    smooth: &mut dyn FnMut(&[f64], &mut [f64]) -> f64,
    x0: Vec<f64>,
    step0: f64,
    max_iters: usize,
    tol: f64,
) -> PgOutcome {
    let n = x0.len();
    let mut x = x0;
    let mut y = x.clone();
    let mut theta = 1.0_f64;
    let mut gy = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut step = step0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iters {
        let fy = smooth(&y, &mut gy);
        let mut accepted = None;
        for _ in 0..80 {
            let mut cand: Vec<f64> = y.iter().zip(&gy).map(|(yi, gi)| yi - step * gi).collect();
            geom.set.prox_l1(&mut cand, step * l1);
            let cand = geom.clip_interior(cand);
            let f_c = smooth(&cand, &mut scratch);
            let d = vecops::sub(&cand, &y);
            let model = fy + dot(&gy, &d) + dot(&d, &d) / (2.0 * step);
            if f_c.is_finite() && f_c <= model + 1e-15 * fy.abs().max(1.0) {
                accepted = Some(cand);
                break;
            }
            step *= 0.5;
        }
        let Some(cand) = accepted else {
            return PgOutcome {
                x,
                iters: it,
                residual,
                converged: false,
            };
        };
        residual = vecops::dist2(&cand, &x);
        let moved = vecops::sub(&cand, &x);
        let restart = dot(&vecops::sub(&y, &cand), &moved) > 0.0;
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = if restart { 0.0 } else { (theta - 1.0) / theta_next };
        theta = if restart { 1.0 } else { theta_next };
        let mut ny: Vec<f64> = cand.iter().zip(&moved).map(|(c, m)| c + beta * m).collect();
        if beta > 0.0 {
            geom.set.project(&mut ny);
            ny = geom.clip_interior(ny);
        }
        x = cand;
        y = ny;
        if residual < tol {
            return PgOutcome {
                x,
                iters: it,
                residual,
                converged: true,
            };
        }
        step *= 1.2;
    }
    PgOutcome {
        x,
        iters: max_iters,
        residual,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn euclid(n: usize) -> Geometry {
        Geometry::euclidean(n, FeasibleSet::WholeSpace).unwrap()
    }

    #[test]
    fn euclidean_divergence_is_half_squared_distance() {
        let g = euclid(2);
        assert_eq!(g.bregman_divergence(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn entropy_divergence_vanishes_on_diagonal() {
        let g = Geometry::entropy_simplex(2, 1.0).unwrap();
        assert_eq!(g.bregman_divergence(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn entropy_divergence_is_kl() {
        // 0.9 ln(1.8) + 0.1 ln(0.2), evaluated with mpmath at 30 digits.
        const KL: f64 = 0.368_064_207_168_497_07;
        let g = Geometry::entropy_simplex(2, 1.0).unwrap();
        let d = g.bregman_divergence(&[0.9, 0.1], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(d, KL, epsilon = 1e-15);
    }

    #[test]
    fn divergence_rejects_points_outside_the_simplex() {
        let g = Geometry::entropy_simplex(2, 1.0).unwrap();
        assert!(matches!(
            g.bregman_divergence(&[0.5, 0.5], &[-0.1, 1.1]),
            Err(Error::BoundaryPoint { index: 0, .. })
        ));
        assert!(matches!(
            g.bregman_divergence(&[0.5, 0.5], &[0.3, 0.3]),
            Err(Error::InfeasiblePoint(_))
        ));
    }

    #[test]
    fn boundary_centre_is_clipped_not_rejected() {
        let g = Geometry::entropy_simplex(3, 1.0).unwrap();
        let d = g.bregman_divergence(&[0.2, 0.3, 0.5], &[0.0, 0.5, 0.5]).unwrap();
        assert!(d.is_finite() && d > 1.0);
    }

    #[test]
    fn entropy_requires_simplex() {
        assert!(Geometry::new(3, FeasibleSet::WholeSpace, Dgf::Entropy).is_err());
    }

    #[test]
    fn three_point_identity_trivial_triple() {
        let g = Geometry::entropy_simplex(3, 1.0).unwrap();
        let p = [0.2, 0.3, 0.5];
        assert_eq!(g.three_point_residual(&p, &p, &p).unwrap(), 0.0);
    }

    #[test]
    fn euclidean_step_is_gradient_step() {
        let g = euclid(2);
        let x = g.mirror_step(&[1.0, 1.0], &[1.0, 0.0], 0.5, &Regularizer::Zero).unwrap();
        assert_eq!(x, vec![0.5, 1.0]);
    }

    #[test]
    fn entropy_step_with_zero_gradient_is_identity() {
        let g = Geometry::entropy_simplex(3, 1.0).unwrap();
        let x = [0.2, 0.3, 0.5];
        let y = g.mirror_step(&x, &[0.0; 3], 0.7, &Regularizer::Zero).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn l1_step_matches_grid_search() {
        // Brute-force minimisation of <g,x> + lam|x|_1 + |x - xt|^2/(2 alpha)
        // over a 1e-3 grid, independent of the soft-threshold closed form.
        let g = euclid(2);
        let (xt, grad, alpha, lam) = ([0.3, -0.8], [0.4, -0.1], 0.5, 0.6);
        let step = g.mirror_step(&xt, &grad, alpha, &Regularizer::l1(lam)).unwrap();
        let phi = |x: [f64; 2]| {
            grad[0] * x[0] + grad[1] * x[1]
                + lam * (x[0].abs() + x[1].abs())
                + ((x[0] - xt[0]).powi(2) + (x[1] - xt[1]).powi(2)) / (2.0 * alpha)
        };
        let mut best = ([0.0, 0.0], f64::INFINITY);
        for i in -2000..=2000 {
            for j in -2000..=2000 {
                let p = [i as f64 * 1e-3, j as f64 * 1e-3];
                let v = phi(p);
                if v < best.1 {
                    best = (p, v);
                }
            }
        }
        assert!(vecops::dist_inf(&step, &best.0) <= 1e-4, "{step:?} vs {:?}", best.0);
    }

    #[test]
    fn generic_solver_matches_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let box_set = FeasibleSet::Box {
            lower: vec![-0.5; 4],
            upper: vec![0.7; 4],
        };
        for geom in [
            euclid(4),
            Geometry::euclidean(4, box_set).unwrap(),
            Geometry::entropy_simplex(4, 1.0).unwrap(),
        ] {
            for reg in [Regularizer::Zero, Regularizer::l1(0.3)] {
                for _ in 0..10 {
                    let x = geom.sample_point(&mut rng, 1.0);
                    let g: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                    let alpha = 0.1 + rng.random::<f64>();
                    let a = geom.mirror_step(&x, &g, alpha, &reg).unwrap();
                    let b = geom.mirror_step_generic(&x, &g, alpha, &reg).unwrap();
                    assert!(vecops::dist_inf(&a, &b) <= 1e-6, "{}: {a:?} vs {b:?}", geom.name());
                }
            }
        }
    }

    #[test]
    fn projections_land_in_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sets = [
            FeasibleSet::Simplex { radius: 2.0 },
            FeasibleSet::Ball { norm: NormKind::L1, radius: 1.5 },
            FeasibleSet::Ball { norm: NormKind::L2, radius: 0.5 },
            FeasibleSet::Ball { norm: NormKind::LInf, radius: 0.25 },
        ];
        for set in &sets {
            for _ in 0..50 {
                let mut v: Vec<f64> = (0..5).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
                set.project(&mut v);
                assert!(set.contains(&v, 1e-12), "{set:?}: {v:?}");
            }
        }
    }

    #[test]
    fn simplex_projection_keeps_interior_points() {
        let mut v = vec![0.2, 0.3, 0.5];
        project_simplex(&mut v, 1.0);
        assert_abs_diff_eq!(v[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(v[2], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn blend_has_weakest_norm() {
        let g = Geometry::new(
            3,
            FeasibleSet::Simplex { radius: 1.0 },
            Dgf::Blend(vec![(1.0, Dgf::Entropy), (3.0, Dgf::Euclidean)]),
        )
        .unwrap();
        assert_eq!(g.norm_kind(), NormKind::L2);
        let Dgf::Blend(parts) = g.dgf() else { unreachable!() };
        assert_abs_diff_eq!(parts[0].0, 0.25);
    }

    #[test]
    fn bad_step_size_is_rejected() {
        let g = euclid(2);
        assert!(g.mirror_step(&[0.0, 0.0], &[1.0, 1.0], 0.0, &Regularizer::Zero).is_err());
        assert!(g.mirror_step(&[0.0, 0.0], &[f64::NAN, 1.0], 1.0, &Regularizer::Zero).is_err());
    }
}
