use serde::{Deserialize, Serialize};

use super::compound::rgm_slope;
use super::lss::{minor_direction_slopes, orthogonal_objective};
use super::{eiv_slope, EstimatorTag, FitResult};
use crate::dataset::Dataset;
use crate::error::{RcrError, Result};
use crate::moments::{compute_moments, WeightConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalKind {
    Ols,
    Or,
    Gmr,
    Deming,
}

/// Non-robust baselines on unweighted cross products.
///
/// OLS and OR accept any `P`; GMR and Deming are simple regression only.
/// `lambda` (the error-variance ratio `σ_ε²/σ_δ²`) is required for Deming
/// and rejected otherwise.
pub fn fit_classical(data: &Dataset, kind: ClassicalKind, lambda: Option<f64>) -> Result<FitResult> {
    match (kind, lambda) {
        (ClassicalKind::Deming, None) => {
            return Err(RcrError::InvalidInput("Deming regression needs lambda".into()))
        }
        (ClassicalKind::Deming, Some(l)) if !(l > 0.0 && l.is_finite()) => {
            return Err(RcrError::InvalidInput(format!("lambda must be positive, got {l}")))
        }
        (ClassicalKind::Deming, Some(_)) => {}
        (_, Some(_)) => {
            return Err(RcrError::InvalidInput("lambda only applies to Deming regression".into()))
        }
        _ => {}
    }

    let m = compute_moments(data, &WeightConfig::unweighted())?;
    match kind {
        ClassicalKind::Ols => {
            let beta = m
                .sxx_block()
                .cholesky()
                .ok_or_else(|| RcrError::Degenerate("regressors are collinear".into()))?
                .solve(&m.sxy_vec());
            let beta: Vec<f64> = beta.iter().copied().collect();
            let obj = m.residual_sum(&beta);
            Ok(FitResult::closed_form(&m, beta, EstimatorTag::Ols, obj))
        }
        ClassicalKind::Or => {
            let beta = if m.p() == 1 {
                vec![eiv_slope(&m.simple()?, 1.0)?]
            } else {
                minor_direction_slopes(&m.s)?
            };
            let obj = orthogonal_objective(&m, &beta);
            Ok(FitResult::closed_form(&m, beta, EstimatorTag::Or, obj))
        }
        ClassicalKind::Gmr => {
            let s = m.simple()?;
            let beta = rgm_slope(&s)?;
            let obj = (s.sxx * s.syy).sqrt() - s.sxy.abs();
            Ok(FitResult::closed_form(&m, vec![beta], EstimatorTag::Gmr, obj))
        }
        ClassicalKind::Deming => {
            let lambda = lambda.unwrap_or(1.0);
            let s = m.simple()?;
            let beta = eiv_slope(&s, lambda)?;
            let obj = s.residual_sum(beta) / (lambda + beta * beta);
            Ok(FitResult::closed_form(&m, vec![beta], EstimatorTag::Deming { lambda }, obj))
        }
    }
}
