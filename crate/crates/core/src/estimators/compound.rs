//! Simple-regression members of the compound family.
//!
//! For fixed `γ` the slope solves
//! `γ S̃_XX β⁴ − γ S̃_XY β³ + (1−γ) S̃_XY β − (1−γ) S̃_YY = 0`.
//! On the bracket spanned by the two endpoint slopes the polynomial is
//! `≤ 0` at `β̂_{γ=1} = S̃_XY/S̃_XX` and `≥ 0` at `β̂_{γ=0} = S̃_YY/S̃_XY`
//! (Cauchy–Schwarz), and the root there is unique and moves monotonically
//! with `γ`. Bisection on that bracket is all that is needed.

use super::{EstimatorTag, FitResult, GammaWeights};
use crate::dataset::Dataset;
use crate::error::{RcrError, Result};
use crate::moments::{compute_moments, SimpleMoments, WeightConfig};

const MAX_BISECTIONS: usize = 200;

/// Robust geometric mean: `sign(S̃_XY) √(S̃_YY / S̃_XX)`.
pub fn fit_rgm(data: &Dataset, w: &WeightConfig) -> Result<FitResult> {
    let m = compute_moments(data, w)?;
    let s = m.simple()?;
    let beta = rgm_slope(&s)?;
    // −½ sign(β) Σ (X−X̂)(Y−Ŷ)/d² at the optimum
    let objective = (s.sxx * s.syy).sqrt() - s.sxy.abs();
    Ok(FitResult::closed_form(&m, vec![beta], EstimatorTag::Rgm, objective))
}

pub(crate) fn rgm_slope(s: &SimpleMoments) -> Result<f64> {
    if s.sxx <= 0.0 || s.syy <= 0.0 {
        return Err(RcrError::Degenerate("zero spread in X or Y".into()));
    }
    if s.sxy == 0.0 {
        return Err(RcrError::SignUndefined);
    }
    Ok(s.sxy.signum() * (s.syy / s.sxx).sqrt())
}

/// Compound fit at `γ = γ_0` for simple regression.
pub fn fit_rcr_simple(data: &Dataset, gamma: f64, w: &WeightConfig) -> Result<FitResult> {
    let m = compute_moments(data, w)?;
    let s = m.simple()?;
    let (beta, iterations) = rcr_slope(&s, gamma)?;
    let q = s.residual_sum(beta);
    let objective = if gamma == 1.0 { q } else { gamma * q + (1.0 - gamma) * q / (beta * beta) };
    let mut fit = FitResult::closed_form(&m, vec![beta], EstimatorTag::Rcr, objective);
    fit.gamma = Some(GammaWeights::simple(gamma)?);
    fit.iterations = iterations;
    Ok(fit)
}

/// Slope root of the compound quartic and the number of bisection steps.
pub fn rcr_slope(s: &SimpleMoments, gamma: f64) -> Result<(f64, usize)> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(RcrError::InvalidInput(format!("gamma {gamma} outside [0, 1]")));
    }
    if s.sxx <= 0.0 {
        return Err(RcrError::Degenerate("zero weighted spread in X".into()));
    }
    if gamma == 1.0 {
        return Ok((s.slope_y_on_x(), 0));
    }
    if s.sxy == 0.0 {
        return Err(RcrError::SignUndefined);
    }
    if gamma == 0.0 {
        return Ok((s.slope_x_on_y(), 0));
    }

    let quartic = |b: f64| gamma * b * b * b * (s.sxx * b - s.sxy) - (1.0 - gamma) * (s.syy - s.sxy * b);
    // `neg` keeps quartic <= 0, `pos` keeps quartic >= 0
    let mut neg = s.slope_y_on_x();
    let mut pos = s.slope_x_on_y();
    let width = (pos - neg).abs();
    if width == 0.0 {
        return Ok((neg, 0));
    }
    for it in 1..=MAX_BISECTIONS {
        let mid = 0.5 * (neg + pos);
        let f = quartic(mid);
        if f == 0.0 {
            return Ok((mid, it));
        }
        if f < 0.0 {
            neg = mid;
        } else {
            pos = mid;
        }
        if (pos - neg).abs() <= 1e-12 * width {
            return Ok((0.5 * (neg + pos), it));
        }
    }
    Err(RcrError::NonConvergence("compound slope bisection"))
}

/// Inverse of the `γ ↦ β̂` map for simple regression.
pub fn gamma_of_beta(data: &Dataset, beta: f64, w: &WeightConfig) -> Result<f64> {
    let m = compute_moments(data, w)?;
    gamma_from_slope(&m.simple()?, beta)
}

/// `γ = f/(1+f)` with `f = (S̃_YY − β S̃_XY) / (β³ (β S̃_XX − S̃_XY))`.
/// The bracket endpoints map to exactly 0 and 1.
pub fn gamma_from_slope(s: &SimpleMoments, beta: f64) -> Result<f64> {
    if s.sxy == 0.0 {
        return Err(RcrError::SignUndefined);
    }
    if s.sxx <= 0.0 {
        return Err(RcrError::Degenerate("zero weighted spread in X".into()));
    }
    let (b1, b0) = (s.slope_y_on_x(), s.slope_x_on_y());
    let (lo, hi) = (b1.min(b0), b1.max(b0));
    let slack = 1e-12 * b1.abs().max(b0.abs());
    if !beta.is_finite() || beta < lo - slack || beta > hi + slack {
        return Err(RcrError::OutsideBracket { beta, lo, hi });
    }
    if beta == b0 {
        return Ok(0.0);
    }
    if beta == b1 {
        return Ok(1.0);
    }
    let num = s.syy - beta * s.sxy;
    let den = beta * beta * beta * (beta * s.sxx - s.sxy);
    let total = num + den;
    if total == 0.0 {
        return Err(RcrError::Degenerate("collapsed compound bracket".into()));
    }
    Ok((num / total).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple(x: &[f64], y: &[f64]) -> Dataset {
        Dataset::from_columns(vec![x.to_vec()], y.to_vec()).unwrap()
    }

    fn d4() -> Dataset {
        simple(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.2, 1.9, 3.1])
    }

    #[test]
    fn rgm_collinear_and_sign_flip() {
        let w = WeightConfig::default();
        let fit = fit_rgm(&simple(&[1.0, -1.0], &[2.0, -2.0]), &w).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-14);
        let fit = fit_rgm(&simple(&[1.0, -1.0], &[-2.0, 2.0]), &w).unwrap();
        assert!((fit.beta[0] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn rgm_errors() {
        let w = WeightConfig::default();
        let square = simple(&[1.0, -1.0, 1.0, -1.0], &[1.0, 1.0, -1.0, -1.0]);
        assert!(matches!(fit_rgm(&square, &w), Err(RcrError::SignUndefined)));
        let flat = simple(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]);
        assert!(matches!(fit_rgm(&flat, &w), Err(RcrError::Degenerate(_))));
        let multi = Dataset::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]], vec![0.0, 1.0, 3.0]);
        assert!(matches!(fit_rgm(&multi.unwrap(), &w), Err(RcrError::InvalidInput(_))));
    }

    #[test]
    fn endpoints_are_exact() {
        let w = WeightConfig::default();
        let d = d4();
        let s = compute_moments(&d, &w).unwrap().simple().unwrap();
        let f1 = fit_rcr_simple(&d, 1.0, &w).unwrap();
        let f0 = fit_rcr_simple(&d, 0.0, &w).unwrap();
        assert_eq!(f1.beta[0], s.sxy / s.sxx);
        assert_eq!(f0.beta[0], s.syy / s.sxy);
        assert_eq!(gamma_from_slope(&s, f1.beta[0]).unwrap(), 1.0);
        assert_eq!(gamma_from_slope(&s, f0.beta[0]).unwrap(), 0.0);
    }

    #[test]
    fn d4_half_gamma_matches_grid_minimum() {
        // Oracle: dense grid on the compound objective evaluated observation
        // by observation, then golden-section refinement around the best node.
        let d = d4();
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 1.2, 1.9, 3.1];
        let (mx, my) = (1.5, 1.55);
        let obj = |b: f64| -> f64 {
            (0..4)
                .map(|i| {
                    let (dx, dy) = (x[i] - mx, y[i] - my);
                    let d2 = dx * dx + dy * dy;
                    let ry = dy - b * dx;
                    let rx = dx - dy / b;
                    (0.5 * ry * ry + 0.5 * rx * rx) / d2
                })
                .sum()
        };
        let s = compute_moments(&d, &WeightConfig::default()).unwrap().simple().unwrap();
        let (lo, hi) = (s.sxy / s.sxx, s.syy / s.sxy);
        let n = 1_000_000;
        let step = (hi - lo) / n as f64;
        let best = (0..=n)
            .map(|j| lo + step * j as f64)
            .min_by(|a, b| obj(*a).total_cmp(&obj(*b)))
            .unwrap();
        let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let c = b - g * (b - a);
            let e = a + g * (b - a);
            if obj(c) < obj(e) {
                b = e;
            } else {
                a = c;
            }
        }
        let oracle = 0.5 * (a + b);
        let fit = fit_rcr_simple(&d, 0.5, &WeightConfig::default()).unwrap();
        assert!((fit.beta[0] - oracle).abs() < 1e-6, "{} vs {oracle}", fit.beta[0]);
        // frozen from the oracle
        assert!((oracle - FROZEN_D4_HALF).abs() < 1e-6, "{oracle}");
    }

    const FROZEN_D4_HALF: f64 = 0.857_983_425_049_461_8;

    #[test]
    fn gamma_round_trip_on_d4() {
        let w = WeightConfig::default();
        let d = d4();
        let fit = fit_rcr_simple(&d, 0.3, &w).unwrap();
        let g = gamma_of_beta(&d, fit.beta[0], &w).unwrap();
        assert!((g - 0.3).abs() < 1e-8, "{g}");
    }

    #[test]
    fn gamma_of_beta_rejects_slopes_outside_bracket() {
        let w = WeightConfig::default();
        let d = d4();
        let s = compute_moments(&d, &w).unwrap().simple().unwrap();
        let hi = (s.sxy / s.sxx).max(s.syy / s.sxy);
        assert!(matches!(gamma_of_beta(&d, hi * 1.01, &w), Err(RcrError::OutsideBracket { .. })));
        assert!(matches!(gamma_of_beta(&d, -1.0, &w), Err(RcrError::OutsideBracket { .. })));
    }

    #[test]
    fn interior_gamma_needs_correlation() {
        let w = WeightConfig::default();
        let square = simple(&[1.0, -1.0, 1.0, -1.0], &[1.0, 1.0, -1.0, -1.0]);
        assert!(matches!(fit_rcr_simple(&square, 0.5, &w), Err(RcrError::SignUndefined)));
        assert!(matches!(fit_rcr_simple(&square, 0.0, &w), Err(RcrError::SignUndefined)));
        assert_eq!(fit_rcr_simple(&square, 1.0, &w).unwrap().beta[0], 0.0);
        assert!(fit_rcr_simple(&d4(), 1.2, &w).is_err());
    }

    #[test]
    fn negative_slopes_work() {
        let w = WeightConfig::default();
        let d = simple(&[0.0, 1.0, 2.0, 3.0], &[0.0, -1.2, -1.9, -3.1]);
        let a = fit_rcr_simple(&d, 0.25, &w).unwrap().beta[0];
        let b = fit_rcr_simple(&d, 0.75, &w).unwrap().beta[0];
        assert!(a < 0.0 && b < 0.0);
        // γ increasing moves toward S̃_XY/S̃_XX, the shallower slope
        assert!(b > a);
        let g = gamma_of_beta(&d, a, &w).unwrap();
        assert!((g - 0.25).abs() < 1e-8);
    }
}
