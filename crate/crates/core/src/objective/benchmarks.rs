//! Synthetic benchmark instances with data-derived constants.
//!
//! Every instance is described by a [`BenchmarkRecord`] holding the generated
//! data and the constants `rho`, `L`; instances rebuilt from a record are
//! identical to freshly generated ones.
//!
//! Constants (all exact over the generated data):
//!
//! | instance | geometry | rho | L |
//! |---|---|---|---|
//! | phase retrieval | l2 ball, radius R | `2 lmax(A'A/m)` | `2R sqrt(lmax(W))`, `W = (1/m) sum ||a_i||^2 a_i a_i'` |
//! | phase retrieval | simplex | `2 max_j (A'A/m)_jj` | `sqrt(max_j (4/m) sum_i a_ij^2 ||a_i||_inf^2)` |
//! | Cauchy regression | R^n | `lmax(A'A/m) / 8` | `sqrt((1/4m) sum ||a_i||_2^2)` |
//! | Cauchy regression | simplex | `max_j (A'A/m)_jj / 8` | `sqrt((1/4m) sum ||a_i||_inf^2)` |
//! | entropy toy | simplex | 1 | sup of `||c - 1 - ln x||_inf + sigma` over the clipped simplex |
//!
//! For phase retrieval, `|<a,x>^2 - b|` composes the 1-Lipschitz `|.|` with
//! `g(x) = <a,x>^2 - b`, whose linearisation error is `<a, x-y>^2`; summing
//! gives `(x-y)' Q (x-y)` with `Q = A'A/m`, bounded by `lmax(Q) ||x-y||_2^2`
//! or by `max_j Q_jj ||x-y||_1^2`, and `D >= ||x-y||^2 / 2` turns this into
//! the moduli above.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::losses::{EntropyToy, PhaseRetrieval, Quadratic, SparseNcvxRegression};
use super::{CompositeObjective, Loss, OracleMode};
use crate::error::{Error, Result};
use crate::geometry::{FeasibleSet, Geometry, NormKind, BOUNDARY_EPS};
use crate::regularizer::Regularizer;
use crate::vecops::{norm2, norm_inf};

/// Radius of the l2 ball used by Euclidean phase retrieval and quadratic
/// instances (planted signals have norm at most 1).
pub const EUCLIDEAN_BALL_RADIUS: f64 = 2.0;
/// Oracle noise amplitude of the entropy toy.
pub const ENTROPY_TOY_SIGMA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum BenchKind {
    PhaseRetrieval { n: usize, m: usize, seed: u64 },
    SparseNcvxRegression { n: usize, m: usize, lambda: f64, seed: u64 },
    EntropyToy { n: usize, seed: u64 },
    Quadratic { n: usize, seed: u64, noise: f64 },
}

impl BenchKind {
    pub fn name(&self) -> &'static str {
        match self {
            BenchKind::PhaseRetrieval { .. } => "phase-retrieval",
            BenchKind::SparseNcvxRegression { .. } => "sparse-ncvx-regression",
            BenchKind::EntropyToy { .. } => "entropy-toy",
            BenchKind::Quadratic { .. } => "quadratic",
        }
    }

    /// Builds a kind from its name and the generic size parameters.
    pub fn from_name(name: &str, n: usize, m: usize, lambda: f64, seed: u64) -> Result<Self> {
        Ok(match name {
            "phase-retrieval" => BenchKind::PhaseRetrieval { n, m, seed },
            "sparse-ncvx-regression" => BenchKind::SparseNcvxRegression { n, m, lambda, seed },
            "entropy-toy" => BenchKind::EntropyToy { n, seed },
            "quadratic" => BenchKind::Quadratic { n, seed, noise: lambda },
            other => return Err(Error::invalid(format!("unknown benchmark `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Euclidean,
    Entropy,
}

impl std::str::FromStr for GeometryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(GeometryKind::Euclidean),
            "entropy" => Ok(GeometryKind::Entropy),
            other => Err(Error::invalid(format!("unknown geometry `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub kind: BenchKind,
    pub geometry: GeometryKind,
    #[serde(default)]
    pub oracle_mode: Option<OracleMode>,
}

impl BenchmarkSpec {
    pub fn new(kind: BenchKind, geometry: GeometryKind) -> Self {
        Self {
            kind,
            geometry,
            oracle_mode: None,
        }
    }

    pub fn with_mode(mut self, mode: OracleMode) -> Self {
        self.oracle_mode = Some(mode);
        self
    }
}

/// Optimal value of an instance, or the best value known when it is not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", content = "value", rename_all = "kebab-case")]
pub enum TMin {
    Known(f64),
    BestKnown(f64),
}

impl TMin {
    pub fn value(&self) -> f64 {
        match *self {
            TMin::Known(v) | TMin::BestKnown(v) => v,
        }
    }

    pub fn is_known(&self) -> bool {
        matches!(self, TMin::Known(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BenchData {
    PhaseRetrieval { a: Vec<Vec<f64>>, b: Vec<f64> },
    SparseNcvxRegression { a: Vec<Vec<f64>>, b: Vec<f64>, scale: f64 },
    EntropyToy { c: Vec<f64>, sigma: f64 },
    Quadratic { kappa: f64, center: Vec<f64>, sigma: f64 },
}

/// Replayable JSON description of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub format: String,
    pub spec: BenchmarkSpec,
    pub dim: usize,
    pub feasible_set: FeasibleSet,
    pub boundary_eps: f64,
    pub regularizer: Regularizer,
    pub data: BenchData,
    pub rho: f64,
    pub lipschitz: f64,
    pub oracle_mode: OracleMode,
    pub x0: Vec<f64>,
    pub planted: Option<Vec<f64>>,
    pub t_min: TMin,
    pub derivation: String,
}

pub const RECORD_FORMAT: &str = "smd-benchmark/1";

/// A ready-to-run instance.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub objective: CompositeObjective,
    pub geometry: Geometry,
    pub x0: Vec<f64>,
    pub t_min: TMin,
    pub planted: Option<Vec<f64>>,
    pub record: BenchmarkRecord,
}

impl Benchmark {
    pub fn from_record(record: BenchmarkRecord) -> Result<Self> {
        if record.format != RECORD_FORMAT {
            return Err(Error::invalid(format!("unsupported record format `{}`", record.format)));
        }
        let n = record.dim;
        let dgf_kind = record.spec.geometry;
        let geometry = match dgf_kind {
            GeometryKind::Euclidean => Geometry::euclidean(n, record.feasible_set.clone())?,
            GeometryKind::Entropy => {
                let FeasibleSet::Simplex { radius } = record.feasible_set else {
                    return Err(Error::invalid("entropy geometry needs a simplex"));
                };
                Geometry::entropy_simplex(n, radius)?
            }
        }
        .with_boundary_eps(record.boundary_eps);
        let loss: Arc<dyn Loss> = match &record.data {
            BenchData::PhaseRetrieval { a, b } => Arc::new(PhaseRetrieval::new(n, flatten(a, n)?, b.clone())?),
            BenchData::SparseNcvxRegression { a, b, scale } => {
                Arc::new(SparseNcvxRegression::new(n, flatten(a, n)?, b.clone(), *scale)?)
            }
            BenchData::EntropyToy { c, sigma } => Arc::new(EntropyToy::new(c.clone(), *sigma, record.boundary_eps)),
            BenchData::Quadratic { kappa, center, sigma } => Arc::new(Quadratic::new(*kappa, center.clone(), *sigma)),
        };
        if loss.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: loss.dim() });
        }
        let objective = CompositeObjective::new(loss, record.regularizer, record.rho, record.lipschitz)?
            .with_mode(record.oracle_mode);
        geometry.check_member(&record.x0)?;
        Ok(Self {
            objective,
            geometry,
            x0: record.x0.clone(),
            t_min: record.t_min,
            planted: record.planted.clone(),
            record,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.record)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_record(serde_json::from_str(s)?)
    }

    pub fn name(&self) -> &'static str {
        self.record.spec.kind.name()
    }

    pub fn rho(&self) -> f64 {
        self.objective.rho
    }

    pub fn lipschitz(&self) -> f64 {
        self.objective.lipschitz
    }
}

fn flatten(rows: &[Vec<f64>], n: usize) -> Result<Vec<f64>> {
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: r.len() });
    }
    Ok(rows.iter().flatten().copied().collect())
}

fn gaussian_rows(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

fn unit_gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let s = norm2(&v);
    v.into_iter().map(|x| x / s).collect()
}

fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// `A'A / m` as a dense matrix.
fn gram(rows: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    let m = rows.len() as f64;
    let mut q = DMatrix::zeros(n, n);
    for r in rows {
        for i in 0..n {
            for j in 0..n {
                q[(i, j)] += r[i] * r[j] / m;
            }
        }
    }
    q
}

fn lambda_max(q: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(q).eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn max_diag(q: &DMatrix<f64>) -> f64 {
    (0..q.nrows()).map(|j| q[(j, j)]).fold(f64::NEG_INFINITY, f64::max)
}

fn check_sizes(n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("benchmark sizes must be positive"));
    }
    Ok(())
}

/// Generates a benchmark instance. All data is a function of the seed.
pub fn make_benchmark(spec: &BenchmarkSpec) -> Result<Benchmark> {
    let record = match spec.kind {
        BenchKind::PhaseRetrieval { n, m, seed } => phase_retrieval(spec, n, m, seed)?,
        BenchKind::SparseNcvxRegression { n, m, lambda, seed } => sparse_regression(spec, n, m, lambda, seed)?,
        BenchKind::EntropyToy { n, seed } => entropy_toy(spec, n, seed)?,
        BenchKind::Quadratic { n, seed, noise } => quadratic(spec, n, seed, noise)?,
    };
    Benchmark::from_record(record)
}

fn base_record(spec: &BenchmarkSpec, n: usize, set: FeasibleSet, data: BenchData) -> BenchmarkRecord {
    BenchmarkRecord {
        format: RECORD_FORMAT.into(),
        spec: spec.clone(),
        dim: n,
        feasible_set: set,
        boundary_eps: BOUNDARY_EPS,
        regularizer: Regularizer::Zero,
        data,
        rho: 0.0,
        lipschitz: 0.0,
        oracle_mode: spec.oracle_mode.unwrap_or_default(),
        x0: vec![],
        planted: None,
        t_min: TMin::Known(0.0),
        derivation: String::new(),
    }
}

fn phase_retrieval(spec: &BenchmarkSpec, n: usize, m: usize, seed: u64) -> Result<BenchmarkRecord> {
    check_sizes(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian_rows(&mut rng, m, n);
    let q = gram(&a, n);
    let (planted, x0, set, rho, lipschitz, derivation) = match spec.geometry {
        GeometryKind::Euclidean => {
            let xs = unit_gaussian(&mut rng, n);
            let x0 = unit_gaussian(&mut rng, n);
            let radius = EUCLIDEAN_BALL_RADIUS;
            let mut w = DMatrix::zeros(n, n);
            for r in &a {
                let s = r.iter().map(|v| v * v).sum::<f64>() / m as f64;
                for i in 0..n {
                    for j in 0..n {
                        w[(i, j)] += s * r[i] * r[j];
                    }
                }
            }
            let rho = 2.0 * lambda_max(q);
            let l = 2.0 * radius * lambda_max(w).sqrt();
            let set = FeasibleSet::Ball { norm: NormKind::L2, radius };
            (xs, x0, set, rho, l, "rho = 2 lmax(A'A/m); L = 2R sqrt(lmax((1/m) sum ||a_i||^2 a_i a_i'))")
        }
        GeometryKind::Entropy => {
            let xs = dirichlet(&mut rng, n);
            let x0 = vec![1.0 / n as f64; n];
            let rho = 2.0 * max_diag(&q);
            let l2 = (0..n)
                .map(|j| a.iter().map(|r| 4.0 * r[j] * r[j] * norm_inf(r).powi(2)).sum::<f64>() / m as f64)
                .fold(0.0, f64::max);
            let set = FeasibleSet::Simplex { radius: 1.0 };
            (xs, x0, set, rho, l2.sqrt(), "rho = 2 max_j (A'A/m)_jj; L^2 = max_j (4/m) sum_i a_ij^2 ||a_i||_inf^2")
        }
    };
    let b: Vec<f64> = a
        .iter()
        .map(|r| r.iter().zip(&planted).map(|(u, v)| u * v).sum::<f64>().powi(2))
        .collect();
    let mut rec = base_record(spec, n, set, BenchData::PhaseRetrieval { a, b });
    rec.rho = rho;
    rec.lipschitz = lipschitz;
    rec.x0 = x0;
    rec.planted = Some(planted);
    rec.t_min = TMin::Known(0.0);
    rec.derivation = derivation.into();
    Ok(rec)
}

fn sparse_regression(spec: &BenchmarkSpec, n: usize, m: usize, lambda: f64, seed: u64) -> Result<BenchmarkRecord> {
    check_sizes(n, m)?;
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian_rows(&mut rng, m, n);
    let q = gram(&a, n);
    let k = (n / 5).max(1);
    let mut support: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        support.swap(i, j);
    }
    let mut planted = vec![0.0; n];
    let (set, x0, rho, l2, derivation) = match spec.geometry {
        GeometryKind::Euclidean => {
            for &j in &support[..k] {
                planted[j] = rng.sample::<f64, _>(StandardNormal);
            }
            let l2 = a.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / (4.0 * m as f64);
            (
                FeasibleSet::WholeSpace,
                vec![0.0; n],
                lambda_max(q) / 8.0,
                l2,
                "rho = lmax(A'A/m)/8; L^2 = (1/4m) sum ||a_i||_2^2",
            )
        }
        GeometryKind::Entropy => {
            let w = dirichlet(&mut rng, k);
            for (&j, wj) in support[..k].iter().zip(w) {
                planted[j] = wj;
            }
            let l2 = a.iter().map(|r| norm_inf(r).powi(2)).sum::<f64>() / (4.0 * m as f64);
            (
                FeasibleSet::Simplex { radius: 1.0 },
                vec![1.0 / n as f64; n],
                max_diag(&q) / 8.0,
                l2,
                "rho = max_j (A'A/m)_jj / 8; L^2 = (1/4m) sum ||a_i||_inf^2",
            )
        }
    };
    let b: Vec<f64> = a
        .iter()
        .map(|r| r.iter().zip(&planted).map(|(u, v)| u * v).sum::<f64>() + 0.05 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let scale = norm2(&planted).max(1.0);
    let reg = Regularizer::l1(lambda);
    let loss = SparseNcvxRegression::new(n, flatten(&a, n)?, b.clone(), scale)?;
    let best = loss.value(&planted) + reg.value(&planted);
    let mut rec = base_record(spec, n, set, BenchData::SparseNcvxRegression { a, b, scale });
    rec.regularizer = reg;
    rec.rho = rho;
    rec.lipschitz = l2.sqrt();
    rec.x0 = x0;
    rec.planted = Some(planted);
    rec.t_min = TMin::BestKnown(best);
    rec.derivation = derivation.into();
    Ok(rec)
}

fn entropy_toy(spec: &BenchmarkSpec, n: usize, seed: u64) -> Result<BenchmarkRecord> {
    check_sizes(n, 1)?;
    if spec.geometry != GeometryKind::Entropy {
        return Err(Error::invalid("entropy-toy is only relatively weakly convex under the entropy geometry"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let sigma = ENTROPY_TOY_SIGMA;
    let log_range = (1.0 / BOUNDARY_EPS).ln();
    // G_j = c_j - 1 - ln x_j +- sigma with -ln x_j in [0, ln(1/eps)].
    let lipschitz = c
        .iter()
        .map(|cj| (cj - 1.0 - sigma).abs().max((cj - 1.0 + log_range + sigma).abs()))
        .fold(0.0, f64::max);
    let t_min = c.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut rec = base_record(
        spec,
        n,
        FeasibleSet::Simplex { radius: 1.0 },
        BenchData::EntropyToy { c, sigma },
    );
    rec.rho = 1.0;
    rec.lipschitz = lipschitz;
    rec.x0 = vec![1.0 / n as f64; n];
    rec.t_min = TMin::Known(t_min);
    rec.derivation = "rho = 1 (f + omega is linear); L = max_j sup |c_j - 1 - ln x_j| + sigma over x_j >= eps; \
                      T_min = min_j c_j at the vertices"
        .into();
    Ok(rec)
}

fn quadratic(spec: &BenchmarkSpec, n: usize, seed: u64, noise: f64) -> Result<BenchmarkRecord> {
    check_sizes(n, 1)?;
    if !(noise >= 0.0) {
        return Err(Error::invalid("noise must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa = 1.0;
    let (set, center, x0, lipschitz) = match spec.geometry {
        GeometryKind::Euclidean => {
            let c: Vec<f64> = unit_gaussian(&mut rng, n).into_iter().map(|v| 0.5 * v).collect();
            let x0: Vec<f64> = unit_gaussian(&mut rng, n).into_iter().map(|v| 1.5 * v).collect();
            let radius = EUCLIDEAN_BALL_RADIUS;
            let l = kappa * (radius + norm2(&c)) + noise * (n as f64).sqrt();
            (FeasibleSet::Ball { norm: NormKind::L2, radius }, c, x0, l)
        }
        GeometryKind::Entropy => {
            let c = dirichlet(&mut rng, n);
            let x0 = vec![1.0 / n as f64; n];
            (FeasibleSet::Simplex { radius: 1.0 }, c, x0, kappa + noise * (n as f64).sqrt())
        }
    };
    let mut rec = base_record(
        spec,
        n,
        set,
        BenchData::Quadratic {
            kappa,
            center: center.clone(),
            sigma: noise,
        },
    );
    // Convex: any positive modulus is valid; the curvature sets the scale.
    rec.rho = kappa;
    rec.lipschitz = lipschitz;
    rec.x0 = x0;
    rec.planted = Some(center);
    rec.t_min = TMin::Known(0.0);
    rec.derivation = "convex; rho = kappa; L = kappa sup||x - c|| + noise sqrt(n) (Minkowski)".into();
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pr(geometry: GeometryKind) -> Benchmark {
        make_benchmark(&BenchmarkSpec::new(
            BenchKind::PhaseRetrieval { n: 10, m: 30, seed: 7 },
            geometry,
        ))
        .unwrap()
    }

    #[test]
    fn planted_phase_retrieval_has_zero_loss() {
        for g in [GeometryKind::Euclidean, GeometryKind::Entropy] {
            let b = pr(g);
            let xs = b.planted.clone().unwrap();
            assert!(b.objective.value(&xs).abs() < 1e-14);
            assert_eq!(b.t_min, TMin::Known(0.0));
            b.geometry.check_member(&xs).unwrap();
        }
    }

    #[test]
    fn euclidean_rho_is_twice_top_eigenvalue() {
        // Independent route: power iteration on A'A/m.
        let b = pr(GeometryKind::Euclidean);
        let BenchData::PhaseRetrieval { a, .. } = &b.record.data else { unreachable!() };
        let n = 10;
        let mut v = vec![1.0; n];
        let mut lam = 0.0;
        for _ in 0..2000 {
            let mut w = vec![0.0; n];
            for r in a {
                let ip: f64 = r.iter().zip(&v).map(|(x, y)| x * y).sum();
                for j in 0..n {
                    w[j] += ip * r[j] / a.len() as f64;
                }
            }
            lam = norm2(&w) / norm2(&v);
            let s = norm2(&w);
            v = w.into_iter().map(|x| x / s).collect();
        }
        assert!((b.rho() - 2.0 * lam).abs() < 1e-9 * b.rho());
    }

    #[test]
    fn record_round_trips_bit_for_bit() {
        let b = pr(GeometryKind::Entropy);
        let json = b.to_json().unwrap();
        let back = Benchmark::from_json(&json).unwrap();
        assert_eq!(back.record, b.record);
        let x = vec![0.1; 10];
        assert_eq!(back.objective.value(&x).to_bits(), b.objective.value(&x).to_bits());
    }

    #[test]
    fn entropy_toy_rejects_euclidean_geometry() {
        let spec = BenchmarkSpec::new(BenchKind::EntropyToy { n: 4, seed: 1 }, GeometryKind::Euclidean);
        assert!(make_benchmark(&spec).is_err());
    }

    #[test]
    fn entropy_toy_minimum_is_smallest_linear_coefficient() {
        let b = make_benchmark(&BenchmarkSpec::new(BenchKind::EntropyToy { n: 5, seed: 3 }, GeometryKind::Entropy)).unwrap();
        let BenchData::EntropyToy { c, .. } = &b.record.data else { unreachable!() };
        let j = (0..5).min_by(|&i, &k| c[i].total_cmp(&c[k])).unwrap();
        let mut e = vec![0.0; 5];
        e[j] = 1.0;
        assert_eq!(b.objective.value(&e), b.t_min.value());
        assert_eq!(b.rho(), 1.0);
    }

    #[test]
    fn invalid_sizes_are_rejected() {
        let spec = BenchmarkSpec::new(BenchKind::PhaseRetrieval { n: 0, m: 3, seed: 0 }, GeometryKind::Euclidean);
        assert!(make_benchmark(&spec).is_err());
        assert!(BenchKind::from_name("nope", 1, 1, 0.0, 0).is_err());
    }
}
