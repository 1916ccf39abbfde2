//! Pair-bootstrap covariance and percentile intervals for any estimator.
//!
//! Replicate `r` draws its resample from a ChaCha8 stream keyed by
//! `(seed, r)`, and results are gathered in replicate order, so the output
//! does not depend on how rayon schedules the work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{RcrError, Result};
use crate::estimators::{EstimatorSpec, FitResult};
use crate::moments::WeightConfig;

/// Largest tolerated share of failed replicates, in percent.
const MAX_FAILURE_PCT: u32 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Fit on the full sample.
    pub estimate: FitResult,
    /// `P × P` slope covariance, row-major.
    pub cov: Vec<Vec<f64>>,
    pub alpha_var: f64,
    /// Percentile intervals, intercept first and then each slope.
    pub ci: Vec<[f64; 2]>,
    pub b: usize,
    pub seed: u64,
    pub level: f64,
    pub failures: usize,
}

impl BootstrapResult {
    /// Interval for slope `j` (0-based).
    pub fn slope_ci(&self, j: usize) -> [f64; 2] {
        self.ci[j + 1]
    }

    pub fn slope_std_errors(&self) -> Vec<f64> {
        (0..self.cov.len()).map(|j| self.cov[j][j].sqrt()).collect()
    }
}

/// The `(seed, r)` stream used by replicate `r`.
pub(crate) fn replicate_rng(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

/// Resamples `(X_i, Y_i)` pairs `b` times, refits, and summarizes the
/// replicate estimates. Failed refits (degenerate resamples, or iterative
/// fits that did not converge) are skipped and counted.
pub fn bootstrap(
    data: &Dataset,
    spec: &EstimatorSpec,
    w: &WeightConfig,
    b: usize,
    seed: u64,
    level: f64,
) -> Result<BootstrapResult> {
    if b < 2 {
        return Err(RcrError::InvalidInput(format!("bootstrap needs B >= 2, got {b}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(RcrError::InvalidInput(format!("level must lie in (0, 1), got {level}")));
    }
    let estimate = spec.fit(data, w)?;
    let n = data.n();

    let draws: Vec<Option<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let fit = data.select(&idx).and_then(|d| spec.fit(&d, w)).ok()?;
            fit.converged.then(|| {
                let mut v = Vec::with_capacity(fit.beta.len() + 1);
                v.push(fit.alpha);
                v.extend(fit.beta);
                v
            })
        })
        .collect();

    let ok: Vec<Vec<f64>> = draws.into_iter().flatten().collect();
    let failures = b - ok.len();
    if failures * 100 > b * MAX_FAILURE_PCT as usize || ok.len() < 2 {
        return Err(RcrError::TooManyFailures { failed: failures, total: b, limit_pct: MAX_FAILURE_PCT });
    }

    let cov_full = covariance(&ok);
    let dim = ok[0].len();
    let cov = (1..dim).map(|i| (1..dim).map(|j| cov_full[i][j]).collect()).collect();
    let lo_q = (1.0 - level) / 2.0;
    let ci = (0..dim)
        .map(|j| {
            let mut col: Vec<f64> = ok.iter().map(|v| v[j]).collect();
            col.sort_by(f64::total_cmp);
            [quantile(&col, lo_q), quantile(&col, 1.0 - lo_q)]
        })
        .collect();

    Ok(BootstrapResult {
        estimate,
        cov,
        alpha_var: cov_full[0][0],
        ci,
        b,
        seed,
        level,
        failures,
    })
}

/// `Σ (v_r − v̄)(v_r − v̄)ᵀ / (R − 1)`.
#[allow(clippy::needless_range_loop)]
fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = rows[0].len();
    let r = rows.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|v| v[j]).sum::<f64>() / r).collect();
    let mut cov = vec![vec![0.0; dim]; dim];
    for v in rows {
        for i in 0..dim {
            for j in 0..=i {
                cov[i][j] += (v[i] - mean[i]) * (v[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in 0..=i {
            cov[i][j] /= r - 1.0;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

/// Linear-interpolation quantile of sorted data (the common "type 7" rule).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy(n: usize) -> Dataset {
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.37 + (i as f64 * 1.7).sin()).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| 1.0 + v + (i as f64 * 2.3).cos()).collect();
        Dataset::from_columns(vec![x], y).unwrap()
    }

    #[test]
    fn identical_across_runs_and_pools() {
        let d = noisy(40);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| bootstrap(&d, &EstimatorSpec::Rgm, &WeightConfig::default(), 200, 7, 0.95))
                .unwrap()
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a, run(3));
        let c = bootstrap(&d, &EstimatorSpec::Rgm, &WeightConfig::default(), 200, 8, 0.95).unwrap();
        assert_ne!(a.cov, c.cov);
    }

    #[test]
    fn covariance_matches_two_pass() {
        let rows: Vec<Vec<f64>> =
            (0..50).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos() + 0.1 * i as f64]).collect();
        let cov = covariance(&rows);
        let m0: f64 = rows.iter().map(|v| v[0]).sum::<f64>() / 50.0;
        let m1: f64 = rows.iter().map(|v| v[1]).sum::<f64>() / 50.0;
        let c01: f64 = rows.iter().map(|v| (v[0] - m0) * (v[1] - m1)).sum::<f64>() / 49.0;
        let c11: f64 = rows.iter().map(|v| (v[1] - m1).powi(2)).sum::<f64>() / 49.0;
        assert!((cov[0][1] - c01).abs() <= 1e-12 * c01.abs());
        assert!((cov[1][1] - c11).abs() <= 1e-12 * c11);
        assert_eq!(cov[0][1], cov[1][0]);
    }

    #[test]
    fn collinear_data_has_zero_spread() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let d = Dataset::from_columns(vec![x], y).unwrap();
        for spec in [EstimatorSpec::Lss, EstimatorSpec::Ols, EstimatorSpec::Rgm] {
            let r = bootstrap(&d, &spec, &WeightConfig::default(), 100, 1, 0.95).unwrap();
            // resamples of one distinct point fail; everything else is exact
            assert!(r.cov[0][0].abs() < 1e-20, "{spec:?}");
            let [lo, hi] = r.slope_ci(0);
            assert!((lo - 2.0).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interval_ordering_and_failure_ceiling() {
        let d = noisy(30);
        let r = bootstrap(&d, &EstimatorSpec::Lss, &WeightConfig::default(), 300, 2, 0.9).unwrap();
        assert!(r.ci.iter().all(|[lo, hi]| lo <= hi));
        assert_eq!(r.ci.len(), 2);
        assert!(r.alpha_var > 0.0 && r.cov[0][0] > 0.0);

        // two points: about half the resamples repeat one point and fail
        let tiny = Dataset::from_columns(vec![vec![0.0, 1.0]], vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            bootstrap(&tiny, &EstimatorSpec::Lss, &WeightConfig::default(), 100, 3, 0.95),
            Err(RcrError::TooManyFailures { .. })
        ));
        assert!(bootstrap(&d, &EstimatorSpec::Lss, &WeightConfig::default(), 1, 3, 0.95).is_err());
        assert!(bootstrap(&d, &EstimatorSpec::Lss, &WeightConfig::default(), 10, 3, 1.0).is_err());
    }

    #[test]
    fn quantile_rule() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert!((quantile(&v, 0.1) - 1.4).abs() < 1e-15);
    }
}
