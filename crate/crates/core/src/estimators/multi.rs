//! Multivariate compound regression.
//!
//! Minimizes
//! `F(β) = (γ_0 + Σ_p γ_p/β_p²) · (S̃_YY + βᵀS̃_XXβ − 2βᵀS̃_XY)`
//! with BFGS from a fixed set of starts, then polishes each candidate with a
//! few damped Newton steps on the analytic Hessian. The stationarity
//! equations alone also have saddle and maximum roots, so candidates are
//! ranked by `F` itself.

use nalgebra::{DMatrix, DVector};

use super::lss::minor_direction_slopes;
use super::{intercept, EstimatorTag, FitResult, GammaWeights};
use crate::dataset::Dataset;
use crate::error::{RcrError, Result};
use crate::moments::{compute_moments, RobustMoments, WeightConfig};

const MAX_ITER: usize = 500;
const GRAD_TOL: f64 = 1e-8;
/// |β_p| / ‖β‖ below this with γ_p > 0 counts as running into the singularity.
const SINGULAR_RATIO: f64 = 1e-8;

struct Problem<'a> {
    sxx: DMatrix<f64>,
    sxy: DVector<f64>,
    syy: f64,
    gamma: &'a [f64],
}

impl Problem<'_> {
    fn p(&self) -> usize {
        self.sxy.len()
    }

    fn factor(&self, b: &DVector<f64>) -> f64 {
        self.gamma[0]
            + (0..self.p())
                .filter(|&j| self.gamma[j + 1] > 0.0)
                .map(|j| self.gamma[j + 1] / (b[j] * b[j]))
                .sum::<f64>()
    }

    fn residual(&self, b: &DVector<f64>) -> f64 {
        (self.syy + b.dot(&(&self.sxx * b)) - 2.0 * b.dot(&self.sxy)).max(0.0)
    }

    fn value(&self, b: &DVector<f64>) -> f64 {
        if self.touches_singularity(b).is_some() {
            return f64::INFINITY;
        }
        self.factor(b) * self.residual(b)
    }

    fn gradient(&self, b: &DVector<f64>) -> DVector<f64> {
        let c = self.factor(b);
        let q = self.residual(b);
        let dq = 2.0 * (&self.sxx * b - &self.sxy);
        DVector::from_fn(self.p(), |l, _| {
            let g = self.gamma[l + 1];
            let dc = if g > 0.0 { -2.0 * g / (b[l] * b[l] * b[l]) } else { 0.0 };
            dc * q + c * dq[l]
        })
    }

    fn hessian(&self, b: &DVector<f64>) -> DMatrix<f64> {
        let p = self.p();
        let c = self.factor(b);
        let q = self.residual(b);
        let dq = 2.0 * (&self.sxx * b - &self.sxy);
        let dc = DVector::from_fn(p, |l, _| {
            let g = self.gamma[l + 1];
            if g > 0.0 { -2.0 * g / b[l].powi(3) } else { 0.0 }
        });
        let mut h = 2.0 * c * &self.sxx + &dc * dq.transpose() + &dq * dc.transpose();
        for l in 0..p {
            let g = self.gamma[l + 1];
            if g > 0.0 {
                h[(l, l)] += q * 6.0 * g / b[l].powi(4);
            }
        }
        h
    }

    /// Magnitude of the terms that make up `F`, the floor for cancellation.
    fn term_scale(&self, b: &DVector<f64>) -> f64 {
        let p = self.p();
        let mut t = self.syy.abs();
        for j in 0..p {
            t += 2.0 * (b[j] * self.sxy[j]).abs();
            for l in 0..p {
                t += (b[j] * b[l] * self.sxx[(j, l)]).abs();
            }
        }
        self.factor(b) * t
    }

    /// Relative stationarity: `‖∇F‖·‖β‖ / term_scale`.
    fn stationarity(&self, b: &DVector<f64>) -> f64 {
        let s = self.term_scale(b);
        if s == 0.0 {
            return 0.0;
        }
        self.gradient(b).norm() * b.norm() / s
    }

    fn touches_singularity(&self, b: &DVector<f64>) -> Option<usize> {
        let norm = b.norm();
        (0..self.p()).find(|&j| self.gamma[j + 1] > 0.0 && b[j].abs() <= SINGULAR_RATIO * norm)
    }
}

/// `F(β)` on explicit moments.
pub fn rcr_objective(m: &RobustMoments, gamma: &GammaWeights, beta: &[f64]) -> f64 {
    let pr = problem(m, gamma);
    pr.value(&DVector::from_column_slice(beta))
}

/// Left-hand sides of the stationarity system `∂F/∂β_l`.
pub fn rcr_gradient(m: &RobustMoments, gamma: &GammaWeights, beta: &[f64]) -> Vec<f64> {
    let pr = problem(m, gamma);
    pr.gradient(&DVector::from_column_slice(beta)).as_slice().to_vec()
}

/// `‖∇F‖·‖β‖` relative to the magnitude of the terms of `F`; the quantity the
/// solver drives below `1e-8`.
pub fn stationarity_residual(m: &RobustMoments, gamma: &GammaWeights, beta: &[f64]) -> f64 {
    let pr = problem(m, gamma);
    pr.stationarity(&DVector::from_column_slice(beta))
}

fn problem<'a>(m: &RobustMoments, gamma: &'a GammaWeights) -> Problem<'a> {
    Problem { sxx: m.sxx_block(), sxy: m.sxy_vec(), syy: m.syy(), gamma: gamma.as_slice() }
}

enum Outcome {
    Converged { beta: DVector<f64>, value: f64, iterations: usize },
    Stalled { beta: DVector<f64>, value: f64, iterations: usize },
    Singular(usize),
}

/// Compound regression for any `P ≥ 1`.
///
/// Starts: the LSS slopes, weighted Y-on-X least squares, and `init` when
/// given. Returns the lowest-objective converged candidate; if none
/// converges, the best iterate with `converged = false`.
pub fn fit_rcr_multi(
    data: &Dataset,
    gamma: &GammaWeights,
    w: &WeightConfig,
    init: Option<&[f64]>,
) -> Result<FitResult> {
    let p = data.p();
    if gamma.p() != p {
        return Err(RcrError::InvalidInput(format!(
            "{} compound weights given for P = {p} (need P + 1)",
            gamma.as_slice().len()
        )));
    }
    if let Some(b) = init {
        if b.len() != p || b.iter().any(|v| !v.is_finite()) {
            return Err(RcrError::InvalidInput("initial slopes must be P finite values".into()));
        }
    }
    let m = compute_moments(data, w)?;
    let pr = problem(&m, gamma);

    let mut starts: Vec<DVector<f64>> = Vec::new();
    if let Ok(b) = minor_direction_slopes(&m.s) {
        starts.push(DVector::from_vec(b));
    }
    if let Some(b) = pr.sxx.clone().cholesky().map(|c| c.solve(&pr.sxy)) {
        starts.push(b);
    }
    if let Some(b) = init {
        starts.push(DVector::from_column_slice(b));
    }
    if starts.is_empty() {
        return Err(RcrError::Degenerate("no usable starting point".into()));
    }

    let mut best_conv: Option<(DVector<f64>, f64, usize)> = None;
    let mut best_stall: Option<(DVector<f64>, f64, usize)> = None;
    let mut singular = None;
    for start in starts {
        if !start.iter().all(|v| v.is_finite()) {
            continue;
        }
        match minimize(&pr, start) {
            Outcome::Converged { beta, value, iterations } => {
                if best_conv.as_ref().is_none_or(|b| value < b.1) {
                    best_conv = Some((beta, value, iterations));
                }
            }
            Outcome::Stalled { beta, value, iterations } => {
                if best_stall.as_ref().is_none_or(|b| value < b.1) {
                    best_stall = Some((beta, value, iterations));
                }
            }
            Outcome::Singular(j) => singular = Some(j),
        }
    }

    let (beta, value, iterations, converged) = match (best_conv, best_stall) {
        (Some((b, v, it)), _) => (b, v, it, true),
        (None, Some((b, v, it))) => (b, v, it, false),
        (None, None) => {
            return Err(match singular {
                Some(coordinate) => RcrError::Singularity { coordinate: coordinate + 1 },
                None => RcrError::Degenerate("no finite starting point".into()),
            })
        }
    };
    let beta: Vec<f64> = beta.iter().copied().collect();
    Ok(FitResult {
        alpha: intercept(&m, &beta),
        beta,
        estimator: EstimatorTag::Rcr,
        gamma: Some(gamma.clone()),
        objective_value: value,
        converged,
        iterations,
    })
}

fn minimize(pr: &Problem, mut x: DVector<f64>) -> Outcome {
    let p = pr.p();
    if let Some(j) = pr.touches_singularity(&x) {
        return Outcome::Singular(j);
    }
    let mut f = pr.value(&x);
    let mut g = pr.gradient(&x);
    let mut h_inv = DMatrix::<f64>::identity(p, p);
    let mut scaled = false;
    let mut iterations = 0;

    while iterations < MAX_ITER {
        if pr.stationarity(&x) <= GRAD_TOL {
            break;
        }
        iterations += 1;
        let mut d = -(&h_inv * &g);
        if d.dot(&g) >= 0.0 {
            h_inv = DMatrix::identity(p, p);
            d = -g.clone();
        }
        if !scaled {
            // first step: keep the move comparable to ‖β‖
            let len = d.norm();
            if len > 0.0 {
                d *= (0.1 * x.norm().max(1e-12) / len).min(1.0);
            }
        }
        let slope = d.dot(&g);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &x + t * &d;
            let fc = pr.value(&cand);
            if fc.is_finite() && fc <= f + 1e-4 * t * slope {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        if let Some(j) = pr.touches_singularity(&x_new) {
            return Outcome::Singular(j);
        }
        let g_new = pr.gradient(&x_new);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if !scaled {
                h_inv = DMatrix::identity(p, p) * (sy / y.dot(&y));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(p, p);
            let left = &i - rho * &s * y.transpose();
            let right = &i - rho * &y * s.transpose();
            h_inv = &left * &h_inv * &right + rho * &s * s.transpose();
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }

    // Newton polish: accept a step whenever it lowers the stationarity
    // measure without raising F beyond rounding.
    for _ in 0..20 {
        let r = pr.stationarity(&x);
        if r <= 1e-3 * GRAD_TOL {
            break;
        }
        let Some(chol) = pr.hessian(&x).cholesky() else { break };
        let step = chol.solve(&-&g);
        let mut improved = false;
        let mut t = 1.0;
        for _ in 0..30 {
            let cand = &x + t * &step;
            let fc = pr.value(&cand);
            if fc.is_finite()
                && fc <= f + 1e-12 * pr.term_scale(&x)
                && pr.stationarity(&cand) < r
            {
                x = cand;
                f = fc;
                g = pr.gradient(&x);
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }

    if let Some(j) = pr.touches_singularity(&x) {
        return Outcome::Singular(j);
    }
    if pr.stationarity(&x) <= GRAD_TOL {
        Outcome::Converged { beta: x, value: f, iterations }
    } else {
        Outcome::Stalled { beta: x, value: f, iterations }
    }
}
