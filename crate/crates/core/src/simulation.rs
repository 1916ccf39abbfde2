//! Errors-in-variables data generator and Monte-Carlo comparison harness.
//!
//! Data follow `Y = α + βx + ε`, `X = x + δ`. A contaminated subset of
//! `⌊fraction·n⌋` rows, chosen uniformly, gets a constant shift added to its
//! error in one direction. Replicate `r` of a study uses the ChaCha8 stream
//! `(seed, r)`; `generate` is replicate 0.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal, StudentT, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{RcrError, Result};
use crate::estimators::{eiv_slope, EstimatorSpec};
use crate::inference::replicate_rng;
use crate::moments::{compute_moments, WeightConfig};

/// Largest tolerated share of dropped replicates per estimator, in percent.
const MAX_DROP_PCT: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    Normal { mean: f64, var: f64 },
    Uniform { lo: f64, hi: f64 },
    /// `scale · t(df)`.
    ScaledT { scale: f64, df: f64 },
}

impl Distribution {
    /// Zero-mean normal; `var = 0` gives a point mass.
    pub fn centered_normal(var: f64) -> Self {
        Self::Normal { mean: 0.0, var }
    }

    /// Zero-mean uniform with the given variance.
    pub fn centered_uniform(var: f64) -> Self {
        let h = (3.0 * var).sqrt();
        Self::Uniform { lo: -h, hi: h }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Normal { var, .. } => var,
            Self::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            Self::ScaledT { scale, df } if df > 2.0 => scale * scale * df / (df - 2.0),
            Self::ScaledT { .. } => f64::INFINITY,
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = match *self {
            Self::Normal { mean, var } => mean.is_finite() && var.is_finite() && var >= 0.0,
            Self::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Self::ScaledT { scale, df } => scale.is_finite() && scale > 0.0 && df.is_finite() && df > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(RcrError::InvalidInput(format!("invalid {what} distribution {self:?}")))
        }
    }

    fn fill(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        match *self {
            Self::Normal { mean, var } => {
                let d = Normal::new(mean, var.sqrt()).expect("validated");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Self::Uniform { lo, hi } if lo == hi => vec![lo; n],
            Self::Uniform { lo, hi } => {
                let d = Uniform::new(lo, hi).expect("validated");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Self::ScaledT { scale, df } => {
                let d = StudentT::new(df).expect("validated");
                (0..n).map(|_| scale * d.sample(rng)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contamination {
    pub fraction: f64,
    pub direction: Axis,
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub alpha_true: f64,
    pub beta_true: f64,
    pub latent: Distribution,
    pub err_x: Distribution,
    pub err_y: Distribution,
    #[serde(default)]
    pub contamination: Option<Contamination>,
    pub seed: u64,
}

/// The four contamination scenarios used for the efficiency-curve and
/// coverage studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Gaussian, 5% of rows shifted by 50 in Y.
    OutliersY,
    /// Gaussian, 5% of rows shifted by 50 in X.
    LeverageX,
    /// Uniform latent and uniform errors at 10% noise-to-signal.
    Uniform,
    /// `√5·t(3)` latent with `t(3)` errors.
    HeavyTailed,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Self::OutliersY, Self::LeverageX, Self::Uniform, Self::HeavyTailed];

    /// Scenario letter `a`–`d`.
    pub fn letter(self) -> char {
        match self {
            Self::OutliersY => 'a',
            Self::LeverageX => 'b',
            Self::Uniform => 'c',
            Self::HeavyTailed => 'd',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.letter() == c)
    }
}

impl ScenarioSpec {
    /// Gaussian model with `x ~ N(0, 100)`, `σ_δ² = var_x`, `σ_ε² = λ·var_x`.
    pub fn gaussian(n: usize, var_x: f64, lambda: f64, contamination: Option<Contamination>, seed: u64) -> Self {
        Self {
            n,
            alpha_true: 1.0,
            beta_true: 1.0,
            latent: Distribution::centered_normal(100.0),
            err_x: Distribution::centered_normal(var_x),
            err_y: Distribution::centered_normal(lambda * var_x),
            contamination,
            seed,
        }
    }

    /// A contaminated-table row: 5% of rows shifted by 50 in `direction`,
    /// `σ_δ² = 10`, `σ_ε² = 10λ`.
    pub fn contaminated_row(direction: Axis, lambda: f64, n: usize, seed: u64) -> Self {
        let c = Contamination { fraction: 0.05, direction, shift: 50.0 };
        Self::gaussian(n, 10.0, lambda, Some(c), seed)
    }

    /// A clean-table row: `σ_δ² = ratio·σ_ζ²` with `σ_ζ² = 100`.
    pub fn clean_row(noise_ratio: f64, lambda: f64, n: usize, seed: u64) -> Self {
        Self::gaussian(n, noise_ratio * 100.0, lambda, None, seed)
    }

    pub fn preset(p: Preset, n: usize, seed: u64) -> Self {
        match p {
            Preset::OutliersY => Self::contaminated_row(Axis::Y, 1.0, n, seed),
            Preset::LeverageX => Self::contaminated_row(Axis::X, 1.0, n, seed),
            Preset::Uniform => {
                let latent = Distribution::Uniform { lo: 0.0, hi: 100.0 };
                let err = Distribution::centered_uniform(0.1 * latent.variance());
                Self {
                    n,
                    alpha_true: 1.0,
                    beta_true: 1.0,
                    latent,
                    err_x: err,
                    err_y: err,
                    contamination: None,
                    seed,
                }
            }
            Preset::HeavyTailed => {
                let err = Distribution::ScaledT { scale: 1.0, df: 3.0 };
                Self {
                    n,
                    alpha_true: 1.0,
                    beta_true: 1.0,
                    latent: Distribution::ScaledT { scale: 5f64.sqrt(), df: 3.0 },
                    err_x: err,
                    err_y: err,
                    contamination: None,
                    seed,
                }
            }
        }
    }

    /// `σ_ε² / σ_δ²` of the uncontaminated errors.
    pub fn lambda(&self) -> f64 {
        self.err_y.variance() / self.err_x.variance()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(RcrError::InvalidInput(format!("scenario needs n >= 4, got {}", self.n)));
        }
        if !(self.alpha_true.is_finite() && self.beta_true.is_finite()) {
            return Err(RcrError::InvalidInput("true coefficients must be finite".into()));
        }
        self.latent.validate("latent")?;
        self.err_x.validate("X error")?;
        self.err_y.validate("Y error")?;
        if let Some(c) = &self.contamination {
            if !(0.0..0.5).contains(&c.fraction) || !c.shift.is_finite() {
                return Err(RcrError::InvalidInput(format!(
                    "contamination fraction must lie in [0, 0.5) with a finite shift, got {c:?}"
                )));
            }
        }
        Ok(())
    }

    fn contaminated_count(&self) -> usize {
        self.contamination.map_or(0, |c| (c.fraction * self.n as f64).floor() as usize)
    }
}

/// A generated sample plus the latent quantities behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub data: Dataset,
    pub latent_x: Vec<f64>,
    /// `α + βx`, the response before measurement error.
    pub clean_y: Vec<f64>,
    pub contaminated: Vec<bool>,
}

pub fn generate(spec: &ScenarioSpec) -> Result<Generated> {
    generate_replicate(spec, 0)
}

/// Sample for replicate `r`; draws come from the stream `(spec.seed, r)` in
/// the order latent, X errors, Y errors, contaminated subset.
pub fn generate_replicate(spec: &ScenarioSpec, r: u64) -> Result<Generated> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = replicate_rng(spec.seed, r);
    let latent_x = spec.latent.fill(&mut rng, n);
    let mut dx = spec.err_x.fill(&mut rng, n);
    let mut dy = spec.err_y.fill(&mut rng, n);
    let mut contaminated = vec![false; n];
    if let Some(c) = spec.contamination {
        let m = spec.contaminated_count();
        let target = if c.direction == Axis::X { &mut dx } else { &mut dy };
        for i in sample(&mut rng, n, m) {
            contaminated[i] = true;
            target[i] += c.shift;
        }
    }
    let clean_y: Vec<f64> = latent_x.iter().map(|x| spec.alpha_true + spec.beta_true * x).collect();
    let xs: Vec<f64> = latent_x.iter().zip(&dx).map(|(a, b)| a + b).collect();
    let ys: Vec<f64> = clean_y.iter().zip(&dy).map(|(a, b)| a + b).collect();
    let data = Dataset::from_columns(vec![xs], ys)?;
    Ok(Generated { data, latent_x, clean_y, contaminated })
}

/// Ground truth the bias is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// The scenario's `beta_true`.
    #[default]
    TrueBeta,
    /// Per replicate, the known-λ Deming slope on the uncontaminated rows.
    CleanDeming,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub bias: f64,
    pub std: f64,
    pub rmse: f64,
}

impl Metrics {
    /// `bias = mean(β̂_r − ref_r)`, `std` = sample standard deviation of
    /// `β̂_r`, `rmse = √(bias² + std²)`. Needs at least two slopes.
    pub fn from_slopes(slopes: &[f64], refs: &[f64]) -> Self {
        let r = slopes.len() as f64;
        let mean = slopes.iter().sum::<f64>() / r;
        let bias = slopes.iter().zip(refs).map(|(b, t)| b - t).sum::<f64>() / r;
        let var = slopes.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / (r - 1.0);
        let std = var.sqrt();
        Self { bias, std, rmse: (bias * bias + std * std).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub label: String,
    pub estimator: EstimatorSpec,
    #[serde(flatten)]
    pub metrics: Metrics,
    /// Replicates where this estimator (or the reference) failed.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub scenario: ScenarioSpec,
    pub replicates: usize,
    pub reference: Reference,
    pub estimators: Vec<EstimatorSummary>,
}

impl SimulationReport {
    pub fn get(&self, label: &str) -> Option<&Metrics> {
        self.estimators.iter().find(|e| e.label == label).map(|e| &e.metrics)
    }

    /// Fixed-width table with one row per estimator.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "n = {}, replicates = {}, lambda = {}, reference = {:?}",
            self.scenario.n,
            self.replicates,
            self.scenario.lambda(),
            self.reference
        );
        let _ = writeln!(out, "{:<16} {:>9} {:>9} {:>9} {:>8}", "estimator", "rmse", "bias", "std", "dropped");
        for e in &self.estimators {
            let m = e.metrics;
            let _ = writeln!(
                out,
                "{:<16} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                e.label, m.rmse, m.bias, m.std, e.dropped
            );
        }
        out
    }
}

fn clean_deming_slope(g: &Generated, lambda: f64) -> Result<f64> {
    let keep: Vec<usize> = (0..g.contaminated.len()).filter(|&i| !g.contaminated[i]).collect();
    let clean = g.data.select(&keep)?;
    let s = compute_moments(&clean, &WeightConfig::unweighted())?.simple()?;
    eiv_slope(&s, lambda)
}

/// Runs `replicates` independent samples and summarizes each estimator's
/// slope. Robust estimators use `w`.
pub fn run_study(
    spec: &ScenarioSpec,
    estimators: &[EstimatorSpec],
    replicates: usize,
    reference: Reference,
    w: &WeightConfig,
) -> Result<SimulationReport> {
    if replicates < 2 {
        return Err(RcrError::InvalidInput(format!("study needs at least 2 replicates, got {replicates}")));
    }
    spec.validate()?;
    let lambda = spec.lambda();
    if reference == Reference::CleanDeming && !(lambda.is_finite() && lambda >= 0.0) {
        return Err(RcrError::InvalidInput(format!("no finite error-variance ratio for this scenario: {lambda}")));
    }

    // Per replicate: reference slope and each estimator's slope (None = failed).
    type Row = (Option<f64>, Vec<Option<f64>>);
    let rows: Vec<Row> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let g = generate_replicate(spec, r as u64)?;
            let reference = match reference {
                Reference::TrueBeta => Some(spec.beta_true),
                Reference::CleanDeming => clean_deming_slope(&g, lambda).ok(),
            };
            let slopes = estimators
                .iter()
                .map(|e| e.fit(&g.data, w).ok().filter(|f| f.converged).map(|f| f.beta[0]))
                .collect();
            Ok((reference, slopes))
        })
        .collect::<Result<_>>()?;

    let summaries = estimators
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let (slopes, refs): (Vec<f64>, Vec<f64>) =
                rows.iter().filter_map(|(t, s)| Some((s[j]?, (*t)?))).unzip();
            let dropped = replicates - slopes.len();
            if dropped * 100 > replicates * MAX_DROP_PCT as usize || slopes.len() < 2 {
                return Err(RcrError::TooManyFailures {
                    failed: dropped,
                    total: replicates,
                    limit_pct: MAX_DROP_PCT,
                });
            }
            Ok(EstimatorSummary {
                label: e.label(),
                estimator: e.clone(),
                metrics: Metrics::from_slopes(&slopes, &refs),
                dropped,
            })
        })
        .collect::<Result<_>>()?;

    Ok(SimulationReport { scenario: spec.clone(), replicates, reference, estimators: summaries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn gaussian_errors_have_stated_moments() {
        let spec = ScenarioSpec::gaussian(100_000, 10.0, 1.0, None, 11);
        let g = generate(&spec).unwrap();
        let dx: Vec<f64> = (0..spec.n).map(|i| g.data.x_row(i)[0] - g.latent_x[i]).collect();
        let dy: Vec<f64> = (0..spec.n).map(|i| g.data.y()[i] - g.clean_y[i]).collect();
        let n = spec.n as f64;
        for v in [&dx, &dy] {
            let (m, var) = mean_var(v);
            // standard errors: sqrt(10/n) for the mean, sqrt(2·10²/n) for the variance
            assert!(m.abs() < 3.0 * (10.0 / n).sqrt(), "mean {m}");
            assert!((var - 10.0).abs() < 3.0 * (200.0 / n).sqrt(), "var {var}");
        }
        assert!(g.contaminated.iter().all(|c| !c));
    }

    #[test]
    fn outlier_rows_are_shifted() {
        let spec = ScenarioSpec::preset(Preset::OutliersY, 200, 5);
        let g = generate(&spec).unwrap();
        let idx: Vec<usize> = (0..200).filter(|&i| g.contaminated[i]).collect();
        assert_eq!(idx.len(), 10);
        let e: Vec<f64> = idx.iter().map(|&i| g.data.y()[i] - g.clean_y[i]).collect();
        let (m, _) = mean_var(&e);
        assert!((m - 50.0).abs() < 3.0 * (10.0f64 / 10.0).sqrt());
        for i in 0..200 {
            assert!(g.data.x_row(i)[0] - g.latent_x[i] < 25.0);
        }
    }

    #[test]
    fn heavy_tailed_preset_variances() {
        let spec = ScenarioSpec::preset(Preset::HeavyTailed, 200_000, 3);
        assert!((spec.latent.variance() - 15.0).abs() < 1e-12);
        assert_eq!(spec.err_x.variance(), 3.0);
        let g = generate(&spec).unwrap();
        let (_, vx) = mean_var(&g.latent_x);
        // t(3) has no fourth moment; allow a generous band
        assert!((vx - 15.0).abs() < 3.0, "{vx}");
        let u = ScenarioSpec::preset(Preset::Uniform, 10, 0);
        assert!((u.err_x.variance() / u.latent.variance() - 0.1).abs() < 1e-12);
        assert_eq!(u.lambda(), 1.0);
    }

    #[test]
    fn generation_is_seeded() {
        let spec = ScenarioSpec::preset(Preset::LeverageX, 50, 9);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        assert_ne!(generate_replicate(&spec, 1).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn zero_lambda_means_exact_response() {
        let spec = ScenarioSpec::clean_row(0.2, 0.0, 20, 1);
        let g = generate(&spec).unwrap();
        assert_eq!(g.data.y(), &g.clean_y[..]);
    }

    #[test]
    fn metrics_identity_and_constant_estimator() {
        let m = Metrics::from_slopes(&[1.0; 10], &[1.0; 10]);
        assert_eq!((m.bias, m.std, m.rmse), (0.0, 0.0, 0.0));
        let s = [0.9, 1.2, 1.05, 0.97, 1.31];
        let m = Metrics::from_slopes(&s, &[1.0; 5]);
        assert!((m.rmse * m.rmse - m.bias * m.bias - m.std * m.std).abs() < 1e-14);
    }

    #[test]
    fn study_is_schedule_independent() {
        let spec = ScenarioSpec::preset(Preset::OutliersY, 100, 21);
        let est = [EstimatorSpec::Lss, EstimatorSpec::Rgm, EstimatorSpec::Or];
        let w = WeightConfig::default();
        let run = |t: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap()
                .install(|| run_study(&spec, &est, 40, Reference::TrueBeta, &w))
                .unwrap()
        };
        let a = run(1);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&run(4)).unwrap());
        assert!(a.to_table().contains("RGM"));
    }

    #[test]
    fn deming_reference_shrinks_with_n() {
        // the reference's own bias against the true slope
        let bias_at = |n: usize| {
            let spec = ScenarioSpec::gaussian(n, 20.0, 1.0, None, 4);
            let rows: Vec<f64> = (0..400)
                .map(|r| clean_deming_slope(&generate_replicate(&spec, r).unwrap(), 1.0).unwrap() - 1.0)
                .collect();
            rows.iter().sum::<f64>() / 400.0
        };
        let (small, large) = (bias_at(200), bias_at(2000));
        assert!(large.abs() < small.abs().max(0.01) && large.abs() < 0.005, "{small} {large}");
    }

    #[test]
    fn invalid_specs() {
        let mut s = ScenarioSpec::gaussian(3, 1.0, 1.0, None, 0);
        assert!(generate(&s).is_err());
        s.n = 10;
        s.contamination = Some(Contamination { fraction: 0.5, direction: Axis::X, shift: 1.0 });
        assert!(generate(&s).is_err());
        s.contamination = None;
        s.err_x = Distribution::Normal { mean: 0.0, var: -1.0 };
        assert!(generate(&s).is_err());
        let ok = ScenarioSpec::gaussian(10, 1.0, 1.0, None, 0);
        assert!(run_study(&ok, &[EstimatorSpec::Lss], 1, Reference::TrueBeta, &WeightConfig::default()).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let s = ScenarioSpec::preset(Preset::HeavyTailed, 200, 1);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioSpec>(&j).unwrap(), s);
        let a = ScenarioSpec::preset(Preset::OutliersY, 200, 1);
        let j = serde_json::to_string(&a).unwrap();
        assert!(j.contains("\"direction\":\"y\""));
        assert_eq!(serde_json::from_str::<ScenarioSpec>(&j).unwrap(), a);
    }
}
