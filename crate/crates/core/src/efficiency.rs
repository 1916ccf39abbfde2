//! Regression efficiencies and efficiency curves over the compound weight.
//!
//! The efficiency along a coordinate is the smallest achievable weighted
//! squared residual in that direction (over hyperplanes through the
//! centroid) divided by the residual of the fit at hand. In direction `X_p`
//! the residual is obtained by solving the fitted equation for `X_p` with the
//! other coordinates held at their observed values, which gives
//! `X_ip − X̂_ip = −r_i / β_p`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{RcrError, Result};
use crate::estimators::{fit_rcr_multi, fit_rgm, rcr_slope, FitResult, GammaWeights};
use crate::moments::{compute_moments, SimpleMoments, WeightConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub e_y: f64,
    pub e_x: Vec<f64>,
    pub sum: f64,
}

impl EfficiencyReport {
    fn new(e_y: f64, e_x: Vec<f64>) -> Self {
        let sum = e_y + e_x.iter().sum::<f64>();
        Self { e_y, e_x, sum }
    }

    /// Smallest efficiency over all coordinates.
    pub fn min(&self) -> f64 {
        self.e_x.iter().copied().fold(self.e_y, f64::min)
    }
}

fn ratio(min: f64, observed: f64) -> f64 {
    if observed <= 0.0 {
        1.0
    } else {
        (min / observed).clamp(0.0, 1.0)
    }
}

/// Efficiencies of an arbitrary fit, from per-observation residuals.
pub fn efficiencies(data: &Dataset, fit: &FitResult, w: &WeightConfig) -> Result<EfficiencyReport> {
    let p = data.p();
    if fit.beta.len() != p {
        return Err(RcrError::InvalidInput("fit dimension differs from data".into()));
    }
    if let Some(j) = fit.beta.iter().position(|b| *b == 0.0) {
        return Err(RcrError::ZeroSlope { coordinate: j + 1 });
    }
    let m = compute_moments(data, w)?;

    let mut ss_y = 0.0;
    for i in 0..data.n() {
        let d = m.d[i];
        if d == 0.0 {
            continue;
        }
        let wi = if w.k == 0 { 1.0 } else { d.powi(w.k as i32).recip() };
        let r = data.y()[i] - fit.predict(data.x_row(i));
        ss_y += wi * r * r;
    }

    let e_y = ratio(coordinate_minimum(&m.s, p)?, ss_y);
    let e_x = (0..p)
        .map(|j| {
            let ss = ss_y / (fit.beta[j] * fit.beta[j]);
            Ok(ratio(coordinate_minimum(&m.s, j)?, ss))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EfficiencyReport::new(e_y, e_x))
}

/// Minimum over slopes of the weighted squared residual along coordinate
/// `j`: the Schur complement `S_jj − S_{j,−j} S_{−j,−j}⁻¹ S_{−j,j}`.
fn coordinate_minimum(s: &DMatrix<f64>, j: usize) -> Result<f64> {
    let dim = s.nrows();
    let others: Vec<usize> = (0..dim).filter(|&k| k != j).collect();
    let block = DMatrix::from_fn(others.len(), others.len(), |a, b| s[(others[a], others[b])]);
    let cross = nalgebra::DVector::from_fn(others.len(), |a, _| s[(others[a], j)]);
    let chol = block.cholesky().ok_or_else(|| {
        RcrError::Degenerate(format!("no spread in the coordinates other than #{}", j + 1))
    })?;
    let coef = chol.solve(&cross);
    Ok((s[(j, j)] - cross.dot(&coef)).max(0.0))
}

/// `(e_Y, e_X)` of the line with slope `beta` on simple-regression moments.
pub fn simple_efficiencies(s: &SimpleMoments, beta: f64) -> (f64, f64) {
    let q = s.residual_sum(beta);
    let b1 = s.slope_y_on_x();
    let b0 = s.slope_x_on_y();
    let e_y = ratio(s.residual_sum(b1), q);
    let e_x = ratio(s.residual_sum(b0) / (b0 * b0), q / (beta * beta));
    (e_y, e_x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCurve {
    pub gamma: Vec<GammaWeights>,
    /// Slope vector at each grid point.
    pub beta: Vec<Vec<f64>>,
    pub e_y: Vec<f64>,
    /// `e_X1..e_XP` at each grid point.
    pub e_x: Vec<Vec<f64>>,
}

impl EfficiencyCurve {
    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// `min(e_Y, e_X1, …)` at grid point `i`.
    pub fn min_efficiency(&self, i: usize) -> f64 {
        self.e_x[i].iter().copied().fold(self.e_y[i], f64::min)
    }

    /// Tab-separated table with a header row. Simple regression gives
    /// `gamma beta e_y e_x`; otherwise every weight and slope gets a column.
    pub fn to_tsv(&self) -> String {
        let p = self.beta.first().map_or(1, Vec::len);
        let mut out = String::new();
        let mut head: Vec<String> = Vec::new();
        if p == 1 {
            head.extend(["gamma".into(), "beta".into(), "e_y".into(), "e_x".into()]);
        } else {
            head.extend((0..=p).map(|j| format!("gamma_{j}")));
            head.extend((1..=p).map(|j| format!("beta_{j}")));
            head.push("e_y".into());
            head.extend((1..=p).map(|j| format!("e_x{j}")));
        }
        out.push_str(&head.join("\t"));
        out.push('\n');
        for i in 0..self.len() {
            let mut row: Vec<String> = Vec::new();
            if p == 1 {
                row.push(self.gamma[i].gamma_y().to_string());
            } else {
                row.extend(self.gamma[i].as_slice().iter().map(f64::to_string));
            }
            row.extend(self.beta[i].iter().map(f64::to_string));
            row.push(self.e_y[i].to_string());
            row.extend(self.e_x[i].iter().map(f64::to_string));
            let _ = writeln!(out, "{}", row.join("\t"));
        }
        out
    }
}

/// Uniform grid `γ_0 ∈ {0, 1/(m−1), …, 1}` for simple regression.
pub fn efficiency_curve(data: &Dataset, grid_size: usize, w: &WeightConfig) -> Result<EfficiencyCurve> {
    if grid_size < 2 {
        return Err(RcrError::InvalidInput("grid needs at least 2 points".into()));
    }
    let s = compute_moments(data, w)?.simple()?;
    let last = (grid_size - 1) as f64;
    let rows: Vec<(f64, f64, f64, f64)> = (0..grid_size)
        .into_par_iter()
        .map(|i| {
            let g = if i + 1 == grid_size { 1.0 } else { i as f64 / last };
            let (beta, _) = rcr_slope(&s, g)?;
            let (e_y, e_x) = simple_efficiencies(&s, beta);
            Ok((g, beta, e_y, e_x))
        })
        .collect::<Result<_>>()?;

    let mut curve = EfficiencyCurve { gamma: vec![], beta: vec![], e_y: vec![], e_x: vec![] };
    for (g, b, ey, ex) in rows {
        curve.gamma.push(GammaWeights::simple(g)?);
        curve.beta.push(vec![b]);
        curve.e_y.push(ey);
        curve.e_x.push(vec![ex]);
    }
    Ok(curve)
}

/// Efficiencies along a caller-supplied list of compound weights (any `P`).
pub fn efficiency_curve_weights(
    data: &Dataset,
    weights: &[GammaWeights],
    w: &WeightConfig,
) -> Result<EfficiencyCurve> {
    let rows: Vec<(FitResult, EfficiencyReport)> = weights
        .par_iter()
        .map(|g| {
            let fit = fit_rcr_multi(data, g, w, None)?;
            let eff = efficiencies(data, &fit, w)?;
            Ok((fit, eff))
        })
        .collect::<Result<_>>()?;
    let mut curve = EfficiencyCurve { gamma: weights.to_vec(), beta: vec![], e_y: vec![], e_x: vec![] };
    for (fit, eff) in rows {
        curve.beta.push(fit.beta);
        curve.e_y.push(eff.e_y);
        curve.e_x.push(eff.e_x);
    }
    Ok(curve)
}

/// γ range (on the `γ_0` axis) where every efficiency is at least the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaInterval {
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub beta_at_lo: f64,
    pub beta_at_hi: f64,
}

impl GammaInterval {
    pub fn beta_min(&self) -> f64 {
        self.beta_at_lo.min(self.beta_at_hi)
    }

    pub fn beta_max(&self) -> f64 {
        self.beta_at_lo.max(self.beta_at_hi)
    }

    pub fn contains(&self, gamma: f64) -> bool {
        self.gamma_lo <= gamma && gamma <= self.gamma_hi
    }
}

/// Longest contiguous run of grid nodes with `min(e_Y, e_X) ≥ threshold`,
/// widened to the linearly interpolated crossings on either side. `None` when
/// no node qualifies. Slopes are interpolated the same way (first slope
/// component for multivariate curves).
pub fn select_gamma_interval(curve: &EfficiencyCurve, threshold: f64) -> Option<GammaInterval> {
    let n = curve.len();
    let v: Vec<f64> = (0..n).map(|i| curve.min_efficiency(i)).collect();
    let g: Vec<f64> = curve.gamma.iter().map(GammaWeights::gamma_y).collect();
    let b: Vec<f64> = curve.beta.iter().map(|b| b[0]).collect();

    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < n {
        if v[i] >= threshold {
            let start = i;
            while i + 1 < n && v[i + 1] >= threshold {
                i += 1;
            }
            if best.is_none_or(|(s, e)| i - start > e - s) {
                best = Some((start, i));
            }
        }
        i += 1;
    }
    let (lo, hi) = best?;

    let cross = |inside: usize, outside: usize| -> (f64, f64) {
        let t = (threshold - v[outside]) / (v[inside] - v[outside]);
        let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 1.0 };
        (g[outside] + t * (g[inside] - g[outside]), b[outside] + t * (b[inside] - b[outside]))
    };
    let (gamma_lo, beta_at_lo) = if lo > 0 { cross(lo, lo - 1) } else { (g[lo], b[lo]) };
    let (gamma_hi, beta_at_hi) = if hi + 1 < n { cross(hi, hi + 1) } else { (g[hi], b[hi]) };
    Some(GammaInterval { gamma_lo, gamma_hi, beta_at_lo, beta_at_hi })
}

/// The fit maximizing `e_Y + e_X` in simple regression, which is the robust
/// geometric mean; at it both efficiencies coincide.
pub fn max_sum_fit(data: &Dataset, w: &WeightConfig) -> Result<FitResult> {
    fit_rgm(data, w)
}
