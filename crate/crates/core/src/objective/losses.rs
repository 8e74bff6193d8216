use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{AbsComposite, Loss, Stream};
use crate::error::{Error, Result};
use crate::vecops::{axpy, dot};

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Robust phase retrieval `f(x) = (1/m) sum_i |<a_i, x>^2 - b_i|`.
///
/// The stochastic oracle draws one measurement index uniformly per call.
#[derive(Debug, Clone)]
pub struct PhaseRetrieval {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PhaseRetrieval {
    /// `a` holds the `m` measurement vectors row-major.
    pub fn new(n: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if n == 0 || a.len() != n * b.len() || b.is_empty() {
            return Err(Error::invalid("phase retrieval: a must be m x n with m = len(b) > 0"));
        }
        Ok(Self { n, a, b })
    }

    pub fn measurements(&self) -> usize {
        self.b.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    fn residual(&self, i: usize, x: &[f64]) -> (f64, f64) {
        let ip = dot(self.row(i), x);
        (ip * ip - self.b[i], ip)
    }
}

impl Loss for PhaseRetrieval {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        let m = self.b.len();
        (0..m).map(|i| self.residual(i, x).0.abs()).sum::<f64>() / m as f64
    }

    fn subgradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let m = self.b.len();
        for i in 0..m {
            let (r, ip) = self.residual(i, x);
            axpy(sign(r) * 2.0 * ip / m as f64, self.row(i), out);
        }
    }

    fn sample_subgradient(&self, x: &[f64], rng: &mut Stream, out: &mut [f64]) {
        let i = rng.random_range(0..self.b.len());
        let (r, ip) = self.residual(i, x);
        let s = sign(r) * 2.0 * ip;
        for (o, a) in out.iter_mut().zip(self.row(i)) {
            *o = s * a;
        }
    }

    fn sample_value(&self, x: &[f64], rng: &mut Stream) -> f64 {
        let i = rng.random_range(0..self.b.len());
        self.residual(i, x).0.abs()
    }

    fn abs_composite(&self) -> Option<&dyn AbsComposite> {
        Some(self)
    }

    fn describe(&self) -> String {
        format!("phase-retrieval(n={}, m={})", self.n, self.b.len())
    }
}

impl AbsComposite for PhaseRetrieval {
    fn pieces(&self) -> usize {
        self.b.len()
    }

    fn weight(&self) -> f64 {
        1.0 / self.b.len() as f64
    }

    fn piece(&self, i: usize, x: &[f64]) -> f64 {
        self.residual(i, x).0
    }

    fn piece_grad(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let ip = dot(self.row(i), x);
        for (o, a) in out.iter_mut().zip(self.row(i)) {
            *o = 2.0 * ip * a;
        }
    }

    fn piece_hess(&self, i: usize, _x: &[f64], out: &mut DMatrix<f64>) {
        let a = self.row(i);
        for r in 0..self.n {
            for c in 0..self.n {
                out[(r, c)] = 2.0 * a[r] * a[c];
            }
        }
    }
}

/// Regression with the nonconvex Cauchy loss
/// `f(x) = (1/m) sum_i 0.5 ln(1 + (<a_i, x> - b_i)^2)`.
///
/// `phi(u) = 0.5 ln(1 + u^2)` has `|phi'| <= 1/2` and `phi'' >= -1/8`.
#[derive(Debug, Clone)]
pub struct SparseNcvxRegression {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    scale: f64,
}

impl SparseNcvxRegression {
    pub fn new(n: usize, a: Vec<f64>, b: Vec<f64>, scale: f64) -> Result<Self> {
        if n == 0 || a.len() != n * b.len() || b.is_empty() {
            return Err(Error::invalid("regression: a must be m x n with m = len(b) > 0"));
        }
        Ok(Self { n, a, b, scale })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }
}

impl Loss for SparseNcvxRegression {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        let m = self.b.len();
        (0..m)
            .map(|i| {
                let r = dot(self.row(i), x) - self.b[i];
                0.5 * r.mul_add(r, 1.0).ln()
            })
            .sum::<f64>()
            / m as f64
    }

    fn subgradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let m = self.b.len();
        for i in 0..m {
            let r = dot(self.row(i), x) - self.b[i];
            axpy(r / (1.0 + r * r) / m as f64, self.row(i), out);
        }
    }

    fn sample_subgradient(&self, x: &[f64], rng: &mut Stream, out: &mut [f64]) {
        let i = rng.random_range(0..self.b.len());
        let r = dot(self.row(i), x) - self.b[i];
        let s = r / (1.0 + r * r);
        for (o, a) in out.iter_mut().zip(self.row(i)) {
            *o = s * a;
        }
    }

    fn sample_value(&self, x: &[f64], rng: &mut Stream) -> f64 {
        let i = rng.random_range(0..self.b.len());
        let r = dot(self.row(i), x) - self.b[i];
        0.5 * r.mul_add(r, 1.0).ln()
    }

    fn is_smooth(&self) -> bool {
        true
    }

    fn sample_scale(&self) -> f64 {
        self.scale
    }

    fn describe(&self) -> String {
        format!("sparse-ncvx-regression(n={}, m={})", self.n, self.b.len())
    }
}

/// `f(x) = -sum x_i ln x_i + <c, x>` on a simplex: relatively weakly convex
/// (modulus 1 w.r.t. the entropy) but not weakly convex. The oracle adds
/// Rademacher noise of amplitude `sigma` per coordinate.
#[derive(Debug, Clone)]
pub struct EntropyToy {
    c: Vec<f64>,
    sigma: f64,
    eps: f64,
}

impl EntropyToy {
    pub fn new(c: Vec<f64>, sigma: f64, eps: f64) -> Self {
        Self { c, sigma, eps }
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.c
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, &xi), ci) in out.iter_mut().zip(x).zip(&self.c) {
            *o = ci - xi.max(self.eps).ln() - 1.0;
        }
    }
}

impl Loss for EntropyToy {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.c)
            .map(|(&xi, ci)| if xi > 0.0 { -xi * xi.ln() + ci * xi } else { ci * xi })
            .sum()
    }

    fn subgradient(&self, x: &[f64], out: &mut [f64]) {
        self.grad_into(x, out);
    }

    fn sample_subgradient(&self, x: &[f64], rng: &mut Stream, out: &mut [f64]) {
        self.grad_into(x, out);
        if self.sigma > 0.0 {
            for o in out.iter_mut() {
                *o += if rng.random::<bool>() { self.sigma } else { -self.sigma };
            }
        }
    }

    fn is_smooth(&self) -> bool {
        true
    }

    fn describe(&self) -> String {
        format!("entropy-toy(n={}, sigma={})", self.c.len(), self.sigma)
    }
}

/// `f(x) = (kappa/2) ||x - c||_2^2` with Gaussian oracle noise `sigma`.
/// Convex for `kappa >= 0`, `|kappa|`-weakly convex otherwise.
#[derive(Debug, Clone)]
pub struct Quadratic {
    kappa: f64,
    c: Vec<f64>,
    sigma: f64,
}

impl Quadratic {
    pub fn new(kappa: f64, c: Vec<f64>, sigma: f64) -> Self {
        Self { kappa, c, sigma }
    }

    pub fn center(&self) -> &[f64] {
        &self.c
    }

    pub fn curvature(&self) -> f64 {
        self.kappa
    }
}

impl Loss for Quadratic {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.kappa * x.iter().zip(&self.c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }

    fn subgradient(&self, x: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(x).zip(&self.c) {
            *o = self.kappa * (a - b);
        }
    }

    fn sample_subgradient(&self, x: &[f64], rng: &mut Stream, out: &mut [f64]) {
        self.subgradient(x, out);
        if self.sigma > 0.0 {
            for o in out.iter_mut() {
                *o += self.sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }

    fn is_smooth(&self) -> bool {
        true
    }

    fn describe(&self) -> String {
        format!("quadratic(kappa={}, n={})", self.kappa, self.c.len())
    }
}

fn common_dim(parts: &[Arc<dyn Loss>]) -> Result<usize> {
    let n = parts.first().ok_or_else(|| Error::invalid("need at least one part"))?.dim();
    if let Some(p) = parts.iter().find(|p| p.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: p.dim() });
    }
    Ok(n)
}

/// `f = sum_k f_k`. The oracle draws one sample from every part.
#[derive(Debug, Clone)]
pub struct SumLoss {
    parts: Vec<Arc<dyn Loss>>,
    n: usize,
}

impl SumLoss {
    pub fn new(parts: Vec<Arc<dyn Loss>>) -> Result<Self> {
        let n = common_dim(&parts)?;
        Ok(Self { parts, n })
    }
}

impl Loss for SumLoss {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.parts.iter().map(|p| p.value(x)).sum()
    }

    fn subgradient(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; self.n];
        out.iter_mut().for_each(|o| *o = 0.0);
        for p in &self.parts {
            p.subgradient(x, &mut tmp);
            axpy(1.0, &tmp, out);
        }
    }

    fn sample_subgradient(&self, x: &[f64], rng: &mut Stream, out: &mut [f64]) {
        let mut tmp = vec![0.0; self.n];
        out.iter_mut().for_each(|o| *o = 0.0);
        for p in &self.parts {
            p.sample_subgradient(x, rng, &mut tmp);
            axpy(1.0, &tmp, out);
        }
    }

    fn is_smooth(&self) -> bool {
        self.parts.iter().all(|p| p.is_smooth())
    }

    fn describe(&self) -> String {
        let inner: Vec<String> = self.parts.iter().map(|p| p.describe()).collect();
        format!("sum[{}]", inner.join(", "))
    }
}

/// `f = max_k f_k`; subgradients come from the first maximising part.
#[derive(Debug, Clone)]
pub struct MaxLoss {
    parts: Vec<Arc<dyn Loss>>,
    n: usize,
}

impl MaxLoss {
    pub fn new(parts: Vec<Arc<dyn Loss>>) -> Result<Self> {
        let n = common_dim(&parts)?;
        Ok(Self { parts, n })
    }

    fn active(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, p) in self.parts.iter().enumerate() {
            let v = p.value(x);
            if v > best.1 {
                best = (k, v);
            }
        }
        best.0
    }
}

impl Loss for MaxLoss {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.parts.iter().map(|p| p.value(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    fn subgradient(&self, x: &[f64], out: &mut [f64]) {
        self.parts[self.active(x)].subgradient(x, out);
    }

    fn sample_subgradient(&self, x: &[f64], rng: &mut Stream, out: &mut [f64]) {
        self.parts[self.active(x)].sample_subgradient(x, rng, out);
    }

    fn describe(&self) -> String {
        let inner: Vec<String> = self.parts.iter().map(|p| p.describe()).collect();
        format!("max[{}]", inner.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::stream;

    fn small_pr() -> PhaseRetrieval {
        let a: Vec<f64> = vec![1.0, 0.5, -0.3, 2.0, 0.7, 0.7];
        let xs: [f64; 2] = [0.6, -0.8];
        let b: Vec<f64> = a.chunks(2).map(|r| (r[0] * xs[0] + r[1] * xs[1]).powi(2)).collect();
        PhaseRetrieval::new(2, a, b).unwrap()
    }

    #[test]
    fn planted_signal_has_zero_loss() {
        assert_eq!(small_pr().value(&[0.6, -0.8]), 0.0);
    }

    #[test]
    fn phase_retrieval_subgradient_matches_finite_differences() {
        // Away from kinks f is smooth; central differences are the oracle.
        let pr = small_pr();
        let x = [0.31, 0.47];
        let mut g = vec![0.0; 2];
        pr.subgradient(&x, &mut g);
        let h = 1e-6;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fd = (pr.value(&xp) - pr.value(&xm)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-7, "coord {j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn piece_gradient_is_chain_rule_row() {
        let pr = small_pr();
        let x = [0.2, -0.1];
        let mut g = vec![0.0; 2];
        pr.piece_grad(1, &x, &mut g);
        let ip = -0.3 * 0.2 + 2.0 * -0.1;
        assert_eq!(g, vec![2.0 * ip * -0.3, 2.0 * ip * 2.0]);
    }

    #[test]
    fn regression_gradient_matches_finite_differences() {
        let reg = SparseNcvxRegression::new(2, vec![1.0, 2.0, -1.0, 0.5, 3.0, -2.0], vec![0.3, -1.0, 2.0], 1.0).unwrap();
        let x = [0.4, -0.7];
        let mut g = vec![0.0; 2];
        reg.subgradient(&x, &mut g);
        let h = 1e-6;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fd = (reg.value(&xp) - reg.value(&xm)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn oracle_mean_matches_subgradient() {
        let pr = small_pr();
        let x = [0.3, 0.2];
        let mut rng = stream(5, 0);
        let mut acc = vec![0.0; 2];
        let mut g = vec![0.0; 2];
        let draws = 60_000;
        for _ in 0..draws {
            pr.sample_subgradient(&x, &mut rng, &mut g);
            axpy(1.0 / draws as f64, &g, &mut acc);
        }
        pr.subgradient(&x, &mut g);
        assert!((acc[0] - g[0]).abs() < 0.02 && (acc[1] - g[1]).abs() < 0.02);
    }

    #[test]
    fn max_loss_uses_active_piece() {
        let a: Arc<dyn Loss> = Arc::new(Quadratic::new(1.0, vec![0.0], 0.0));
        let b: Arc<dyn Loss> = Arc::new(Quadratic::new(1.0, vec![2.0], 0.0));
        let m = MaxLoss::new(vec![a, b]).unwrap();
        let mut g = vec![0.0];
        m.subgradient(&[3.0], &mut g);
        assert_eq!(g, vec![3.0]);
        m.subgradient(&[-1.0], &mut g);
        assert_eq!(g, vec![-3.0]);
    }

    #[test]
    fn mismatched_parts_are_rejected() {
        let a: Arc<dyn Loss> = Arc::new(Quadratic::new(1.0, vec![0.0], 0.0));
        let b: Arc<dyn Loss> = Arc::new(Quadratic::new(1.0, vec![0.0, 1.0], 0.0));
        assert!(SumLoss::new(vec![a, b]).is_err());
    }
}
