//! Robust compound regression (RCR) for linear errors-in-variables models.
//!
//! The crate covers the whole estimator family: least sine squares (LSS),
//! robust geometric mean (RGM), compound fits at any simplex weight, and the
//! classical OLS / orthogonal / geometric-mean / Deming baselines. Around the
//! fitters sit regression-efficiency diagnostics, pair-bootstrap inference and
//! a Monte-Carlo harness for contamination studies.
//!
//! ```
//! use rcr_core::{fit_lss, Dataset, WeightConfig};
//!
//! let data = Dataset::from_columns(vec![vec![1.0, -1.0]], vec![2.0, -2.0]).unwrap();
//! let fit = fit_lss(&data, &WeightConfig::default()).unwrap();
//! assert!((fit.beta[0] - 2.0).abs() < 1e-12);
//! ```

pub mod dataset;
pub mod efficiency;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod moments;
pub mod simulation;

pub use dataset::{CenteredView, Dataset};
pub use efficiency::{
    efficiencies, efficiency_curve, efficiency_curve_weights, max_sum_fit, select_gamma_interval,
    simple_efficiencies, EfficiencyCurve, EfficiencyReport, GammaInterval,
};
pub use error::{ErrorKind, RcrError, Result};
pub use estimators::{
    fit_classical, fit_lss, fit_rcr_multi, fit_rcr_simple, fit_rgm, gamma_of_beta, ClassicalKind,
    EstimatorSpec, EstimatorTag, FitResult, GammaWeights,
};
pub use inference::{bootstrap, BootstrapResult};
pub use moments::{compute_moments, sine_residuals, RobustMoments, WeightConfig, ZeroDistancePolicy};
pub use simulation::{
    generate, generate_replicate, run_study, Axis, Contamination, Distribution, Generated, Metrics, Preset,
    Reference, ScenarioSpec, SimulationReport,
};
