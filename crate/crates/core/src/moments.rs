//! Distance weights and the robust weighted cross-product matrix `S̃`.
//!
//! Each observation is weighted by `1 / d_i^k`, where `d_i` is its Euclidean
//! distance to the centroid in raw coordinates. `k = 2` gives the robust
//! family; `k = 0` gives plain (unnormalized) cross products. Entries are pure
//! sums with no `1/n` factor, since every estimator only uses ratios.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{RcrError, Result};

/// What to do with an observation sitting exactly on the centroid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroDistancePolicy {
    /// Skip the term. The point lies on every hyperplane through the
    /// centroid, so its sine residual is taken as 0.
    #[default]
    DropTerm,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightConfig {
    /// Power applied to the centroid distance in the weight `1/d_i^k`.
    pub k: u32,
    pub zero_distance_policy: ZeroDistancePolicy,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self { k: 2, zero_distance_policy: ZeroDistancePolicy::DropTerm }
    }
}

impl WeightConfig {
    pub fn with_k(k: u32) -> Self {
        Self { k, ..Self::default() }
    }

    /// Unweighted cross products, used by the classical baselines.
    pub fn unweighted() -> Self {
        Self::with_k(0)
    }
}

/// Centroid, distances and the weighted matrix `S̃` ordered `(X_1..X_P, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustMoments {
    pub s: DMatrix<f64>,
    pub d: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub y_mean: f64,
    /// Observations with `d_i > 0`.
    pub effective_n: usize,
    pub k: u32,
}

/// The three entries of `S̃` in simple regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleMoments {
    pub sxx: f64,
    pub sxy: f64,
    pub syy: f64,
}

impl SimpleMoments {
    /// Weighted Y-residual sum `Σ (Y_i − Ŷ_i)² / d_i^k` of the line with
    /// slope `beta` through the centroid.
    pub fn residual_sum(&self, beta: f64) -> f64 {
        let v = self.syy - 2.0 * beta * self.sxy + beta * beta * self.sxx;
        v.max(0.0)
    }

    /// `β̂_{γ=1} = S̃_XY / S̃_XX`, the weighted Y-on-X slope.
    pub fn slope_y_on_x(&self) -> f64 {
        self.sxy / self.sxx
    }

    /// `β̂_{γ=0} = S̃_YY / S̃_XY`, the weighted X-on-Y slope.
    pub fn slope_x_on_y(&self) -> f64 {
        self.syy / self.sxy
    }
}

impl RobustMoments {
    pub fn p(&self) -> usize {
        self.x_mean.len()
    }

    pub fn syy(&self) -> f64 {
        let p = self.p();
        self.s[(p, p)]
    }

    /// `P × P` block of regressor cross moments.
    pub fn sxx_block(&self) -> DMatrix<f64> {
        let p = self.p();
        self.s.view((0, 0), (p, p)).into_owned()
    }

    /// Regressor / response cross moments `S̃_{X_p Y}`.
    pub fn sxy_vec(&self) -> DVector<f64> {
        let p = self.p();
        self.s.view((0, p), (p, 1)).column(0).into_owned()
    }

    pub fn simple(&self) -> Result<SimpleMoments> {
        if self.p() != 1 {
            return Err(RcrError::InvalidInput(format!(
                "simple-regression estimator needs P = 1, data has P = {}",
                self.p()
            )));
        }
        Ok(SimpleMoments { sxx: self.s[(0, 0)], sxy: self.s[(0, 1)], syy: self.s[(1, 1)] })
    }

    /// `Σ (Y_i − Ŷ_i)² / d_i^k` for the hyperplane with slopes `beta` through
    /// the centroid, as the quadratic form `S̃_YY + βᵀS̃_XXβ − 2βᵀS̃_XY`.
    pub fn residual_sum(&self, beta: &[f64]) -> f64 {
        let p = self.p();
        let mut q = self.syy();
        for j in 0..p {
            q -= 2.0 * beta[j] * self.s[(j, p)];
            for l in 0..p {
                q += beta[j] * beta[l] * self.s[(j, l)];
            }
        }
        q.max(0.0)
    }

    /// Largest absolute entry; the natural scale for tolerances on `S̃`.
    pub fn scale(&self) -> f64 {
        self.s.amax()
    }
}

pub fn compute_moments(data: &Dataset, w: &WeightConfig) -> Result<RobustMoments> {
    let c = data.center();
    let n = data.n();
    let p = data.p();
    let dim = p + 1;

    let mut d = Vec::with_capacity(n);
    let mut s = DMatrix::<f64>::zeros(dim, dim);
    let mut effective_n = 0;
    let mut z = vec![0.0; dim];
    for i in 0..n {
        z[..p].copy_from_slice(c.dx_row(i));
        z[p] = c.dy[i];
        let di = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        d.push(di);
        if di == 0.0 {
            match w.zero_distance_policy {
                ZeroDistancePolicy::DropTerm => continue,
                ZeroDistancePolicy::Error => return Err(RcrError::ZeroDistance { row: i + 1 }),
            }
        }
        effective_n += 1;
        let wi = if w.k == 0 { 1.0 } else { di.powi(w.k as i32).recip() };
        for a in 0..dim {
            for b in a..dim {
                s[(a, b)] += wi * z[a] * z[b];
            }
        }
    }
    if effective_n == 0 {
        return Err(RcrError::Degenerate("every observation sits at the centroid".into()));
    }
    for a in 0..dim {
        for b in 0..a {
            s[(a, b)] = s[(b, a)];
        }
    }
    Ok(RobustMoments { s, d, x_mean: c.x_mean, y_mean: c.y_mean, effective_n, k: w.k })
}

/// `sin θ_i = d_OR_i / d_i` for the hyperplane `Y = alpha + Xᵀbeta`.
///
/// For hyperplanes through the centroid every value lies in `[0, 1]`.
/// Observations at the centroid give 0 under [`ZeroDistancePolicy::DropTerm`].
pub fn sine_residuals(
    data: &Dataset,
    alpha: f64,
    beta: &[f64],
    policy: ZeroDistancePolicy,
) -> Result<Vec<f64>> {
    if beta.len() != data.p() {
        return Err(RcrError::InvalidInput("slope vector length differs from P".into()));
    }
    if !alpha.is_finite() || beta.iter().any(|b| !b.is_finite()) {
        return Err(RcrError::InvalidInput("non-finite fit parameters".into()));
    }
    let c = data.center();
    let norm = (1.0 + beta.iter().map(|b| b * b).sum::<f64>()).sqrt();
    (0..data.n())
        .map(|i| {
            let dx = c.dx_row(i);
            let di = (dx.iter().map(|v| v * v).sum::<f64>() + c.dy[i] * c.dy[i]).sqrt();
            if di == 0.0 {
                return match policy {
                    ZeroDistancePolicy::DropTerm => Ok(0.0),
                    ZeroDistancePolicy::Error => Err(RcrError::ZeroDistance { row: i + 1 }),
                };
            }
            let fitted = alpha + data.x_row(i).iter().zip(beta).map(|(x, b)| x * b).sum::<f64>();
            let d_or = (data.y()[i] - fitted).abs() / norm;
            Ok(d_or / di)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn simple(x: &[f64], y: &[f64]) -> Dataset {
        Dataset::from_columns(vec![x.to_vec()], y.to_vec()).unwrap()
    }

    fn d4() -> Dataset {
        simple(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.2, 1.9, 3.1])
    }

    #[test]
    fn symmetric_pair() {
        let m = compute_moments(&simple(&[-1.0, 1.0], &[-1.0, 1.0]), &WeightConfig::default()).unwrap();
        let r2 = 2f64.sqrt();
        assert!(m.d.iter().all(|d| (d - r2).abs() < 1e-15));
        let s = m.simple().unwrap();
        assert!((s.sxx - 1.0).abs() < 1e-15);
        assert!((s.sxy - 1.0).abs() < 1e-15);
        assert!((s.syy - 1.0).abs() < 1e-15);
    }

    #[test]
    fn collinear_pair() {
        let m = compute_moments(&simple(&[1.0, -1.0], &[2.0, -2.0]), &WeightConfig::default()).unwrap();
        let r5 = 5f64.sqrt();
        assert!(m.d.iter().all(|d| (d - r5).abs() < 1e-15));
        let s = m.simple().unwrap();
        assert!((s.sxx - 0.4).abs() < 1e-15);
        assert!((s.sxy - 0.8).abs() < 1e-15);
        assert!((s.syy - 1.6).abs() < 1e-15);
    }

    #[test]
    fn d4_matches_direct_summation() {
        // Independent oracle: plain scalar loops, no matrix assembly.
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 1.2, 1.9, 3.1];
        let (mx, my) = (1.5, 1.55);
        let (mut sxx, mut sxy, mut syy) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..4 {
            let (a, b) = (x[i] - mx, y[i] - my);
            let d2 = a * a + b * b;
            sxx += a * a / d2;
            sxy += a * b / d2;
            syy += b * b / d2;
        }
        // weights sum to 4 when k = 2 (each term a²/d² + b²/d² = 1)
        assert!((sxx + syy - 4.0).abs() < 1e-12);
        let s = compute_moments(&d4(), &WeightConfig::default()).unwrap().simple().unwrap();
        assert!((s.sxx - sxx).abs() < 1e-14);
        assert!((s.sxy - sxy).abs() < 1e-14);
        assert!((s.syy - syy).abs() < 1e-14);
        // exact rational evaluation, frozen
        assert!((s.sxx - 2.309_503_802_891_568).abs() < 1e-13);
        assert!((s.sxy - 1.939_059_969_923_076_6).abs() < 1e-13);
        assert!((s.syy - 1.690_496_197_108_432).abs() < 1e-13);
    }

    #[test]
    fn zero_distance_policies() {
        let d = simple(&[-1.0, 0.0, 1.0], &[-1.0, 0.0, 1.0]);
        let m = compute_moments(&d, &WeightConfig::default()).unwrap();
        assert_eq!(m.effective_n, 2);
        assert_eq!(m.d[1], 0.0);
        let strict = WeightConfig { k: 2, zero_distance_policy: ZeroDistancePolicy::Error };
        assert!(matches!(compute_moments(&d, &strict), Err(RcrError::ZeroDistance { row: 2 })));

        let all_same = simple(&[1.0, 1.0, 1.0], &[2.0, 2.0, 2.0]);
        assert!(matches!(
            compute_moments(&all_same, &WeightConfig::default()),
            Err(RcrError::Degenerate(_))
        ));

        let sines = sine_residuals(&d, 0.0, &[1.0], ZeroDistancePolicy::DropTerm).unwrap();
        assert_eq!(sines, vec![0.0, 0.0, 0.0]);
        assert!(sine_residuals(&d, 0.0, &[1.0], ZeroDistancePolicy::Error).is_err());
    }

    #[test]
    fn exact_fit_has_zero_sines() {
        let d = simple(&[1.0, -1.0], &[2.0, -2.0]);
        let s = sine_residuals(&d, 0.0, &[2.0], ZeroDistancePolicy::DropTerm).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn sines_match_angle_oracle_on_d4() {
        // Angle between the line direction (1, β) and the ray centroid → point.
        let d = d4();
        let beta = 0.9871;
        let alpha = 1.55 - beta * 1.5;
        let got = sine_residuals(&d, alpha, &[beta], ZeroDistancePolicy::DropTerm).unwrap();
        let line_angle = beta.atan();
        for (i, g) in got.iter().enumerate() {
            let ray = (d.y()[i] - 1.55).atan2(d.x_row(i)[0] - 1.5);
            let want = (ray - line_angle).sin().abs();
            assert!((g - want).abs() < 1e-12, "{i}: {g} vs {want}");
        }
    }

    #[test]
    fn k_zero_is_plain_cross_products() {
        let d = d4();
        let m = compute_moments(&d, &WeightConfig::unweighted()).unwrap().simple().unwrap();
        let sxx: f64 = [0.0f64, 1.0, 2.0, 3.0].iter().map(|x| (x - 1.5).powi(2)).sum();
        assert!((m.sxx - sxx).abs() < 1e-14);
    }

    fn arb_data() -> impl Strategy<Value = Dataset> {
        proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0), 5..25)
            .prop_map(|rows| {
                let x = rows.iter().map(|r| vec![r.0, r.1]).collect();
                let y = rows.iter().map(|r| r.2).collect();
                Dataset::from_rows(x, y).unwrap()
            })
    }

    fn shifted(d: &Dataset, f: impl Fn(f64) -> f64) -> Dataset {
        let x = (0..d.n()).map(|i| d.x_row(i).iter().map(|v| f(*v)).collect()).collect();
        Dataset::from_rows(x, d.y().iter().map(|v| f(*v)).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn matrix_is_symmetric_psd(d in arb_data(), k in 0u32..4) {
            let m = compute_moments(&d, &WeightConfig::with_k(k)).unwrap();
            let scale = m.scale();
            for a in 0..3 {
                prop_assert!(m.s[(a, a)] >= 0.0);
                for b in 0..3 {
                    prop_assert!((m.s[(a, b)] - m.s[(b, a)]).abs() <= 1e-12 * scale);
                }
            }
            let ev = m.s.clone().symmetric_eigenvalues();
            let tr = m.s.trace();
            prop_assert!(ev.iter().all(|e| *e >= -1e-10 * tr));
            prop_assert!(m.d.iter().all(|v| *v >= 0.0));
            prop_assert!(m.effective_n <= d.n());
        }

        #[test]
        fn joint_scaling(d in arb_data(), c in 0.1f64..10.0, k in 0u32..4) {
            let a = compute_moments(&d, &WeightConfig::with_k(k)).unwrap();
            let b = compute_moments(&shifted(&d, |v| v * c), &WeightConfig::with_k(k)).unwrap();
            for (da, db) in a.d.iter().zip(&b.d) {
                prop_assert!((db - c * da).abs() <= 1e-9 * (1.0 + db.abs()));
            }
            let factor = c.powi(2 - k as i32);
            for (sa, sb) in a.s.iter().zip(b.s.iter()) {
                prop_assert!((sb - factor * sa).abs() <= 1e-9 * b.scale());
            }
        }

        #[test]
        fn translation_invariance(d in arb_data(), t in -1e3f64..1e3) {
            let a = compute_moments(&d, &WeightConfig::default()).unwrap();
            let b = compute_moments(&shifted(&d, |v| v + t), &WeightConfig::default()).unwrap();
            for (da, db) in a.d.iter().zip(&b.d) {
                prop_assert!((da - db).abs() <= 1e-9 * (1.0 + da));
            }
            for (sa, sb) in a.s.iter().zip(b.s.iter()) {
                prop_assert!((sa - sb).abs() <= 1e-9 * a.scale());
            }
        }
    }
}
