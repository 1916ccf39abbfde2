//! Line and hyperplane fitters.
//!
//! Every fitter returns a plane through the centroid, so the intercept is
//! always `ȳ − x̄ᵀβ`. Simple-regression compound weights use `γ := γ_0`, the
//! weight on the Y-direction residuals: `γ = 1` is weighted Y-on-X least
//! squares and `γ = 0` weighted X-on-Y.

mod classical;
mod compound;
mod lss;
mod multi;

use serde::{Deserialize, Serialize};

pub use classical::{fit_classical, ClassicalKind};
pub use compound::{fit_rcr_simple, fit_rgm, gamma_from_slope, gamma_of_beta, rcr_slope};
pub use lss::{fit_lss, lss_slope_closed_form, lss_slopes_eigen};
pub use multi::{fit_rcr_multi, rcr_gradient, rcr_objective, stationarity_residual};

use crate::dataset::Dataset;
use crate::error::{RcrError, Result};
use crate::moments::{RobustMoments, SimpleMoments, WeightConfig};

/// Simplex weights `(γ_0, γ_1, …, γ_P)`; `γ_0` belongs to Y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GammaWeights(Vec<f64>);

impl GammaWeights {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        if g.len() < 2 {
            return Err(RcrError::InvalidInput("need weights for Y and at least one X".into()));
        }
        if g.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(RcrError::InvalidInput(format!("weights must be finite and >= 0: {g:?}")));
        }
        let sum: f64 = g.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(RcrError::InvalidInput(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(g))
    }

    /// `(γ, 1 − γ)` for simple regression.
    pub fn simple(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(RcrError::InvalidInput(format!("gamma {gamma} outside [0, 1]")));
        }
        Self::new(vec![gamma, 1.0 - gamma])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn gamma_y(&self) -> f64 {
        self.0[0]
    }

    /// Number of regressors these weights are for.
    pub fn p(&self) -> usize {
        self.0.len() - 1
    }
}

impl TryFrom<Vec<f64>> for GammaWeights {
    type Error = RcrError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<GammaWeights> for Vec<f64> {
    fn from(g: GammaWeights) -> Self {
        g.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorTag {
    Lss,
    Rgm,
    Rcr,
    Ols,
    Or,
    Gmr,
    Deming { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub estimator: EstimatorTag,
    pub gamma: Option<GammaWeights>,
    /// Value of the criterion the estimator minimizes, at the fit.
    pub objective_value: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub(crate) fn closed_form(
        m: &RobustMoments,
        beta: Vec<f64>,
        estimator: EstimatorTag,
        objective_value: f64,
    ) -> Self {
        Self {
            alpha: intercept(m, &beta),
            beta,
            estimator,
            gamma: None,
            objective_value,
            converged: true,
            iterations: 0,
        }
    }

    /// Fitted response at `x`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.alpha + self.beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

pub(crate) fn intercept(m: &RobustMoments, beta: &[f64]) -> f64 {
    m.y_mean - m.x_mean.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>()
}

/// A fully specified estimator, as chosen on the command line or in a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Ols,
    Or,
    Gmr,
    Deming { lambda: f64 },
    Lss,
    Rgm,
    Rcr { gamma: GammaWeights },
}

impl EstimatorSpec {
    /// Fits `data`. The robust estimators use `w`; the classical ones always
    /// use unweighted moments.
    pub fn fit(&self, data: &Dataset, w: &WeightConfig) -> Result<FitResult> {
        match self {
            Self::Ols => fit_classical(data, ClassicalKind::Ols, None),
            Self::Or => fit_classical(data, ClassicalKind::Or, None),
            Self::Gmr => fit_classical(data, ClassicalKind::Gmr, None),
            Self::Deming { lambda } => fit_classical(data, ClassicalKind::Deming, Some(*lambda)),
            Self::Lss => fit_lss(data, w),
            Self::Rgm => fit_rgm(data, w),
            Self::Rcr { gamma } if data.p() == 1 && gamma.p() == 1 => {
                fit_rcr_simple(data, gamma.gamma_y(), w)
            }
            Self::Rcr { gamma } => fit_rcr_multi(data, gamma, w, None),
        }
    }

    /// Short label for reports.
    pub fn label(&self) -> String {
        match self {
            Self::Ols => "OLS".into(),
            Self::Or => "OR".into(),
            Self::Gmr => "GMR".into(),
            Self::Deming { lambda } => format!("Deming({lambda})"),
            Self::Lss => "LSS".into(),
            Self::Rgm => "RGM".into(),
            Self::Rcr { gamma } => {
                let g: Vec<String> = gamma.as_slice().iter().map(|v| v.to_string()).collect();
                format!("RCR({})", g.join(","))
            }
        }
    }
}

/// Slope of the line through the centroid that minimizes
/// `Σ w_i (r_i)² / (λ + β²)`, i.e. the known-variance-ratio (Deming) solution
/// on the given moments. `λ = 1` is orthogonal regression; on distance
/// weighted moments it is the LSS closed form.
///
/// Evaluated in whichever of the two algebraically equal forms avoids
/// cancellation.
pub(crate) fn eiv_slope(m: &SimpleMoments, lambda: f64) -> Result<f64> {
    let a = m.syy - lambda * m.sxx;
    let disc = (a * a + 4.0 * lambda * m.sxy * m.sxy).sqrt();
    let scale = m.syy.abs() + lambda * m.sxx.abs();
    if disc <= 1e-10 * scale {
        return Err(RcrError::AmbiguousDirection);
    }
    if a >= 0.0 {
        if m.sxy == 0.0 {
            return Err(RcrError::VerticalFit);
        }
        Ok((a + disc) / (2.0 * m.sxy))
    } else {
        Ok(2.0 * lambda * m.sxy / (disc - a))
    }
}
