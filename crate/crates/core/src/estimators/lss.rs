use nalgebra::{DMatrix, SymmetricEigen};

use super::{eiv_slope, EstimatorTag, FitResult};
use crate::dataset::Dataset;
use crate::error::{RcrError, Result};
use crate::moments::{compute_moments, RobustMoments, WeightConfig};

/// Least sine squares.
///
/// Simple regression uses the closed form; higher dimensions take the
/// eigenvector of `S̃` belonging to its smallest eigenvalue. The objective
/// reported is `Σ sin²θ_i` (for `k = 2`; in general `Σ d_OR_i² / d_i^k`).
pub fn fit_lss(data: &Dataset, w: &WeightConfig) -> Result<FitResult> {
    let m = compute_moments(data, w)?;
    let beta = if m.p() == 1 {
        vec![lss_slope_closed_form(&m)?]
    } else {
        lss_slopes_eigen(&m)?
    };
    let objective = orthogonal_objective(&m, &beta);
    Ok(FitResult::closed_form(&m, beta, EstimatorTag::Lss, objective))
}

/// `(S̃_YY − S̃_XX + √((S̃_YY − S̃_XX)² + 4S̃_XY²)) / (2S̃_XY)`.
pub fn lss_slope_closed_form(m: &RobustMoments) -> Result<f64> {
    eiv_slope(&m.simple()?, 1.0)
}

/// Slopes from the minor eigenvector of `S̃`: `β_p = −v_p / v_Y`.
pub fn lss_slopes_eigen(m: &RobustMoments) -> Result<Vec<f64>> {
    minor_direction_slopes(&m.s)
}

pub(crate) fn minor_direction_slopes(s: &DMatrix<f64>) -> Result<Vec<f64>> {
    let dim = s.nrows();
    let p = dim - 1;
    let eig = SymmetricEigen::new(s.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l0, l1) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    let lmax = eig.eigenvalues[order[dim - 1]].abs();
    let trace = s.trace();

    if trace <= 0.0 || l1 <= 1e-12 * trace {
        return Err(RcrError::Degenerate(format!(
            "weighted cross-product matrix has rank below {p}"
        )));
    }
    if l1 - l0 <= 1e-10 * lmax {
        return Err(RcrError::AmbiguousDirection);
    }
    let v = eig.eigenvectors.column(order[0]);
    let vy = v[p];
    if vy.abs() <= 1e-10 * v.norm() {
        return Err(RcrError::VerticalFit);
    }
    Ok((0..p).map(|j| -v[j] / vy).collect())
}

/// `Σ w_i r_i² / (1 + βᵀβ)`, the weighted squared orthogonal distance.
pub(crate) fn orthogonal_objective(m: &RobustMoments, beta: &[f64]) -> f64 {
    m.residual_sum(beta) / (1.0 + beta.iter().map(|b| b * b).sum::<f64>())
}
