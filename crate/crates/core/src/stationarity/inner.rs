//! Inner solvers for `min_x T(x) + D(x, z) / lambda`.

use nalgebra::{DMatrix, DVector};

use super::{InnerOptions, ProxMethod};
use crate::geometry::{Dgf, FeasibleSet, Geometry, NormKind};
use crate::objective::{AbsComposite, CompositeObjective};
use crate::vecops::{dot, norm2, norm_inf};

pub(super) struct Diagnostics {
    pub iters: usize,
    pub residual: f64,
    pub method: ProxMethod,
    pub converged: bool,
}

struct Problem<'a> {
    obj: &'a CompositeObjective,
    geom: &'a Geometry,
    lambda: f64,
    z: &'a [f64],
    grad_z: Vec<f64>,
}

impl Problem<'_> {
    fn phi(&self, x: &[f64]) -> f64 {
        self.obj.value(x) + self.geom.divergence_unchecked(x, self.z) / self.lambda
    }

    fn f_grad(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.obj.loss.subgradient(x, out);
        self.obj.loss.value(x)
    }
}

pub(super) fn solve(
    obj: &CompositeObjective,
    geom: &Geometry,
    lambda: f64,
    z: &[f64],
    start: Vec<f64>,
    opts: &InnerOptions,
) -> (Vec<f64>, Diagnostics) {
    let p = Problem {
        obj,
        geom,
        lambda,
        z,
        grad_z: geom.grad_omega_vec(z),
    };
    let smooth_path = obj.loss.is_smooth() && geom.mirror_average(z, 1.0, z, 1.0).is_some();
    let mut result = None;
    if smooth_path {
        result = Some(bregman_gradient(&p, start.clone(), opts));
    } else if opts.newton && obj.reg.is_zero() {
        if let (Some(ac), Some(space)) = (obj.loss.abs_composite(), newton_space(geom)) {
            result = smoothed_newton(&p, ac, space, &start);
        }
    }
    let (x, diag) = result.unwrap_or_else(|| mirror_descent(&p, start.clone(), opts));

    // The centre and the warm start are feasible candidates; the minimiser
    // can never be worse than either.
    let phi_x = p.phi(&x);
    let mut best = (x, phi_x, diag);
    for cand in [z.to_vec(), start] {
        let v = p.phi(&cand);
        if v < best.1 - 1e-15 * best.1.abs().max(1.0) || !best.1.is_finite() {
            let d = Diagnostics {
                iters: best.2.iters,
                residual: best.2.residual,
                method: ProxMethod::Centre,
                converged: best.2.converged,
            };
            best = (cand, v, d);
        }
    }
    (best.0, best.2)
}

/// Bregman proximal gradient: the divergence term is kept exact and `f` is
/// linearised, with backtracking on
/// `f(x+) <= f(x) + <grad f(x), x+ - x> + D(x+, x) / t`.
fn bregman_gradient(p: &Problem, start: Vec<f64>, opts: &InnerOptions) -> (Vec<f64>, Diagnostics) {
    let n = start.len();
    let inv_lambda = 1.0 / p.lambda;
    let mut x = start;
    let mut gx = vec![0.0; n];
    let mut fx = p.f_grad(&x, &mut gx);
    let mut gn = vec![0.0; n];
    let mut go = p.geom.grad_omega_vec(&x);
    let mut go_n = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut t = p.lambda;
    let mut residual = f64::INFINITY;
    let mu = 1.0 / p.lambda - p.obj.rho;
    let (simplex, floor) = match p.geom.feasible_set() {
        FeasibleSet::Simplex { radius } => (true, 10.0 * p.geom.boundary_eps() * radius),
        _ => (false, 0.0),
    };
    let mut iters = opts.max_iters;
    let mut converged = false;
    for it in 1..=opts.max_iters {
        let mut accepted = None;
        for _ in 0..80 {
            let y = p.geom.mirror_average(p.z, inv_lambda, &x, 1.0 / t).expect("closed-form mirror map");
            let a = 1.0 / (inv_lambda + 1.0 / t);
            let Ok(xn) = p.geom.mirror_step(&y, &gx, a, &p.obj.reg) else {
                t *= 0.5;
                continue;
            };
            let f_n = p.f_grad(&xn, &mut gn);
            let d: Vec<f64> = xn.iter().zip(&x).map(|(u, v)| u - v).collect();
            let d_fwd = p.geom.divergence_unchecked(&xn, &x);
            // The value test loses precision near the minimiser; the
            // gradient test (curvature along d) does not.
            let value_ok = f_n <= fx + dot(&gx, &d) + d_fwd / t;
            let curv: f64 = gn.iter().zip(&gx).zip(&d).map(|((a, b), di)| (a - b) * di).sum();
            let grad_ok = curv <= (d_fwd + p.geom.divergence_unchecked(&x, &xn)) / t;
            let resolvable = d_fwd / t > 1e-12 * (1.0 + fx.abs());
            if f_n.is_finite() && if resolvable { value_ok } else { grad_ok } {
                accepted = Some((xn, f_n));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, f_n)) = accepted else {
            iters = it;
            break;
        };
        // x+ exactly minimises Phi perturbed by e, so ||x+ - x*|| <= ||e||_* / mu.
        p.geom.grad_omega(&xn, &mut go_n);
        for i in 0..n {
            e[i] = gx[i] - gn[i] + (go_n[i] - go[i]) / t;
        }
        if simplex {
            // Gradients on the simplex are defined modulo the all-ones
            // vector; coordinates pinned at the clipping floor carry a
            // bound multiplier and are left out.
            let mut hi = f64::NEG_INFINITY;
            let mut lo = f64::INFINITY;
            for i in 0..n {
                if xn[i] > floor {
                    hi = hi.max(e[i]);
                    lo = lo.min(e[i]);
                }
            }
            for i in 0..n {
                e[i] = if xn[i] > floor { e[i] - 0.5 * (hi + lo) } else { 0.0 };
            }
        }
        residual = p.geom.dual_norm(&e) / mu;
        x = xn;
        fx = f_n;
        std::mem::swap(&mut gx, &mut gn);
        std::mem::swap(&mut go, &mut go_n);
        t = (2.0 * t).min(1e12);
        if residual < opts.tol {
            iters = it;
            converged = true;
            break;
        }
    }
    (
        x,
        Diagnostics {
            iters,
            residual,
            method: ProxMethod::BregmanGradient,
            converged,
        },
    )
}

/// Mirror descent on the `(1/lambda - rho)`-relatively strongly convex prox
/// objective with steps `2 / (mu (k + 2))` and `(k + 1)`-weighted averaging.
fn mirror_descent(p: &Problem, start: Vec<f64>, opts: &InnerOptions) -> (Vec<f64>, Diagnostics) {
    let n = start.len();
    let mu = 1.0 / p.lambda - p.obj.rho;
    let min_iters = opts.max_iters / 10;
    let mut x = start.clone();
    let mut avg = start.clone();
    let mut wsum = 0.0;
    let mut best = (p.phi(&start), start);
    let mut g = vec![0.0; n];
    let mut go = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iters = 0;
    let mut converged = false;
    for k in 0..opts.max_iters {
        iters = k + 1;
        p.obj.loss.subgradient(&x, &mut g);
        p.geom.grad_omega(&x, &mut go);
        for i in 0..n {
            g[i] += (go[i] - p.grad_z[i]) / p.lambda;
        }
        let step = 2.0 / (mu * (k as f64 + 2.0));
        match p.geom.mirror_step(&x, &g, step, &p.obj.reg) {
            Ok(xn) => x = xn,
            Err(_) => break,
        }
        let w = k as f64 + 1.0;
        wsum += w;
        let prev = avg.clone();
        for i in 0..n {
            avg[i] += w / wsum * (x[i] - avg[i]);
        }
        let v = p.phi(&x);
        if v < best.0 {
            best = (v, x.clone());
        }
        residual = p.geom.divergence_unchecked(&avg, &prev);
        if k >= min_iters && residual < opts.tol {
            converged = true;
            break;
        }
    }
    let avg = p.geom.clip_interior(avg);
    let mut out = best.1;
    let mut out_v = best.0;
    for cand in [avg, x] {
        let v = p.phi(&cand);
        if v < out_v {
            out_v = v;
            out = cand;
        }
    }
    (
        out,
        Diagnostics {
            iters,
            residual,
            method: ProxMethod::MirrorDescent,
            converged,
        },
    )
}

#[derive(Clone, Copy)]
enum NewtonSpace {
    Free,
    Ball(f64),
    Simplex,
}

fn newton_space(geom: &Geometry) -> Option<NewtonSpace> {
    match (geom.dgf(), geom.feasible_set()) {
        (Dgf::Euclidean, FeasibleSet::WholeSpace) => Some(NewtonSpace::Free),
        (
            Dgf::Euclidean,
            FeasibleSet::Ball {
                norm: NormKind::L2,
                radius,
            },
        ) => Some(NewtonSpace::Ball(*radius)),
        (Dgf::Entropy, FeasibleSet::Simplex { .. }) => Some(NewtonSpace::Simplex),
        _ => None,
    }
}

/// Smoothing `|c| ~ sqrt(c^2 + mu^2)`.
fn smooth_abs(c: f64, mu: f64) -> (f64, f64, f64) {
    let r = c.hypot(mu);
    (r, c / r, mu * mu / (r * r * r))
}

/// Newton's method on `w sum sqrt(c_i^2 + mu^2) + D(x, z)/lambda` with `mu`
/// driven to zero. Each smoothed objective is strongly convex: the outer
/// function stays convex and 1-Lipschitz, so the modulus `rho` is unchanged.
/// Returns `None` when a linear solve fails or the result leaves `X`.
fn smoothed_newton(
    p: &Problem,
    ac: &dyn AbsComposite,
    space: NewtonSpace,
    start: &[f64],
) -> Option<(Vec<f64>, Diagnostics)> {
    let n = start.len();
    let m = ac.pieces();
    let w = ac.weight();
    let cscale = 1.0 + (0..m).map(|i| ac.piece(i, p.z).abs()).fold(0.0, f64::max);
    let mu_min = 1e-15 * cscale;
    let mut mu = cscale;
    let mut x = start.to_vec();
    let mut iters = 0;
    let mut last_step = f64::INFINITY;
    let mut pg = vec![0.0; n];
    let mut ph = DMatrix::zeros(n, n);
    let mut col = vec![0.0; n];
    let mut e = vec![0.0; n];

    let value = |x: &[f64], mu: f64| -> f64 {
        let s: f64 = (0..m).map(|i| smooth_abs(ac.piece(i, x), mu).0).sum();
        w * s + p.geom.divergence_unchecked(x, p.z) / p.lambda
    };

    loop {
        for _ in 0..60 {
            let mut grad = DVector::zeros(n);
            let mut hess = DMatrix::zeros(n, n);
            let mut val = 0.0;
            for i in 0..m {
                let (h, h1, h2) = smooth_abs(ac.piece(i, &x), mu);
                val += w * h;
                ac.piece_grad(i, &x, &mut pg);
                ac.piece_hess(i, &x, &mut ph);
                let gv = DVector::from_column_slice(&pg);
                grad.axpy(w * h1, &gv, 1.0);
                hess += &ph * (w * h1);
                hess.ger(w * h2, &gv, &gv, 1.0);
            }
            val += p.geom.divergence_unchecked(&x, p.z) / p.lambda;
            p.geom.grad_omega(&x, &mut col);
            for j in 0..n {
                grad[j] += (col[j] - p.grad_z[j]) / p.lambda;
            }
            for j in 0..n {
                e.iter_mut().for_each(|v| *v = 0.0);
                e[j] = 1.0;
                p.geom.hessian_apply(&x, &e, &mut col).ok()?;
                for r in 0..n {
                    hess[(r, j)] += col[r] / p.lambda;
                }
            }
            let d: Vec<f64> = match space {
                NewtonSpace::Simplex => {
                    let mut k = DMatrix::zeros(n + 1, n + 1);
                    k.view_mut((0, 0), (n, n)).copy_from(&hess);
                    for j in 0..n {
                        k[(n, j)] = 1.0;
                        k[(j, n)] = 1.0;
                    }
                    let mut rhs = DVector::zeros(n + 1);
                    for j in 0..n {
                        rhs[j] = -grad[j];
                    }
                    let sol = k.lu().solve(&rhs)?;
                    let mut d: Vec<f64> = sol.iter().take(n).copied().collect();
                    let mean = d.iter().sum::<f64>() / n as f64;
                    d.iter_mut().for_each(|v| *v -= mean);
                    d
                }
                _ => hess.lu().solve(&(-&grad))?.iter().copied().collect(),
            };
            if !d.iter().all(|v| v.is_finite()) {
                return None;
            }
            let dec = -grad.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
            if !(dec >= -1e-12 * (1.0 + val.abs())) {
                return None;
            }
            if dec <= 1e-30 * (1.0 + val.abs()) {
                last_step = 0.0;
                break;
            }
            let mut s: f64 = 1.0;
            if let NewtonSpace::Simplex = space {
                for j in 0..n {
                    if d[j] < 0.0 {
                        s = s.min(0.99 * x[j] / -d[j]);
                    }
                }
            }
            let mut moved = false;
            for _ in 0..60 {
                let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + s * b).collect();
                let vn = value(&xn, mu);
                if vn <= val - 1e-4 * s * dec + 1e-15 * (1.0 + val.abs()) {
                    last_step = s * norm_inf(&d);
                    x = xn;
                    moved = true;
                    break;
                }
                s *= 0.5;
            }
            iters += 1;
            if !moved || last_step < 1e-15 * (1.0 + norm_inf(&x)) {
                break;
            }
        }
        if mu <= mu_min {
            break;
        }
        mu = (mu * 0.1).max(mu_min);
    }
    match space {
        NewtonSpace::Ball(radius) if norm2(&x) > radius * (1.0 + 1e-12) => return None,
        NewtonSpace::Simplex => {
            x = p.geom.clip_interior(x);
        }
        _ => {}
    }
    if !x.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some((
        x,
        Diagnostics {
            iters,
            residual: last_step,
            method: ProxMethod::SmoothedNewton,
            converged: last_step < 1e-8,
        },
    ))
}
