//! `rcr`: fit, efficiency curves, bootstrap and simulation studies from the
//! command line.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.
//! Output is assembled in memory and written only once the command has
//! succeeded, so a failing run never leaves a partial file behind.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rcr_core::simulation::Preset;
use rcr_core::{
    bootstrap, efficiency_curve, efficiency_curve_weights, run_study, select_gamma_interval, Dataset,
    ErrorKind, EstimatorSpec, FitResult, GammaInterval, GammaWeights, RcrError, Reference, ScenarioSpec,
    WeightConfig, ZeroDistancePolicy,
};
use serde::Serialize;
use serde_json::json;

const SCHEMA: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "rcr", version, about = "Robust compound regression for errors-in-variables data")]
struct Cli {
    /// Worker threads for bootstrap and simulation (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one estimator and print the coefficients
    Fit(FitArgs),
    /// Efficiencies over a grid of compound weights, plus the threshold interval
    Curve(CurveArgs),
    /// Pair-bootstrap covariance and percentile intervals
    Bootstrap(BootstrapArgs),
    /// Monte-Carlo comparison of estimators on simulated data
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV file with a header row; every column numeric
    #[arg(long)]
    input: PathBuf,
    /// Response column (default: the last column)
    #[arg(long)]
    response: Option<String>,
}

#[derive(Args, Debug)]
struct WeightArgs {
    /// Power k of the distance weight 1/d^k
    #[arg(long, default_value_t = 2)]
    k: u32,
    /// Handling of observations at the centroid
    #[arg(long, value_enum, default_value_t = ZeroDistance::Drop)]
    zero_distance: ZeroDistance,
}

impl WeightArgs {
    fn config(&self) -> WeightConfig {
        WeightConfig {
            k: self.k,
            zero_distance_policy: match self.zero_distance {
                ZeroDistance::Drop => ZeroDistancePolicy::DropTerm,
                ZeroDistance::Error => ZeroDistancePolicy::Error,
            },
        }
    }
}

#[derive(Args, Debug)]
struct EstimatorArgs {
    #[arg(long, value_enum)]
    estimator: Kind,
    /// Compound weight: a scalar gamma (weight on Y) for simple regression or
    /// a comma list gamma_0,gamma_1,..,gamma_P summing to 1
    #[arg(long)]
    gamma: Option<String>,
    /// Error-variance ratio for Deming regression
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write the result here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Grid size for simple regression
    #[arg(long, default_value_t = 1001)]
    grid: usize,
    /// Report the gamma range where every efficiency is at least this
    #[arg(long)]
    threshold: Option<f64>,
    /// Weight vectors for P >= 2, separated by ';' (e.g. "0.4,0.3,0.3;0.2,0.4,0.4")
    #[arg(long)]
    gamma: Option<String>,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct BootstrapArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[command(flatten)]
    weights: WeightArgs,
    /// Number of bootstrap replicates
    #[arg(long = "B", default_value_t = 1000)]
    b: usize,
    #[arg(long)]
    seed: u64,
    /// Confidence level of the percentile intervals
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario as a JSON file (its seed is replaced by --seed)
    #[arg(long, conflicts_with = "scenario")]
    input: Option<PathBuf>,
    /// Built-in scenario: a (Y outliers), b (X leverage), c (uniform), d (t(3))
    #[arg(long)]
    scenario: Option<char>,
    /// Sample size for a built-in scenario
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    /// Estimators to compare
    #[arg(long, value_enum, value_delimiter = ',', default_value = "or,lss,gmr,rgm")]
    estimator: Vec<Kind>,
    /// Scalar gamma used when the list includes rcr
    #[arg(long)]
    gamma: Option<f64>,
    /// Error-variance ratio used when the list includes deming
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = RefArg::TrueBeta)]
    reference: RefArg,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Ols,
    Or,
    Gmr,
    Deming,
    Lss,
    Rgm,
    Rcr,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
    Table,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ZeroDistance {
    Drop,
    Error,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum RefArg {
    TrueBeta,
    CleanDeming,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(RcrError),
}

impl From<RcrError> for CliError {
    fn from(e: RcrError) -> Self {
        Self::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn parse_vector(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad number '{t}' in --gamma"))))
        .collect()
}

fn parse_weights(s: &str) -> CliResult<GammaWeights> {
    let v = parse_vector(s)?;
    let g = if v.len() == 1 { GammaWeights::simple(v[0]) } else { GammaWeights::new(v) };
    g.map_err(|e| CliError::Usage(format!("--gamma: {e}")))
}

fn estimator_spec(kind: Kind, gamma: Option<GammaWeights>, lambda: Option<f64>) -> CliResult<EstimatorSpec> {
    if (kind == Kind::Rcr) != gamma.is_some() {
        return usage("--gamma is required by, and only accepted with, --estimator rcr");
    }
    if (kind == Kind::Deming) != lambda.is_some() {
        return usage("--lambda is required by, and only accepted with, --estimator deming");
    }
    if let Some(l) = lambda {
        if !(l > 0.0 && l.is_finite()) {
            return usage(format!("--lambda must be positive, got {l}"));
        }
    }
    Ok(match kind {
        Kind::Ols => EstimatorSpec::Ols,
        Kind::Or => EstimatorSpec::Or,
        Kind::Gmr => EstimatorSpec::Gmr,
        Kind::Deming => EstimatorSpec::Deming { lambda: lambda.unwrap() },
        Kind::Lss => EstimatorSpec::Lss,
        Kind::Rgm => EstimatorSpec::Rgm,
        Kind::Rcr => EstimatorSpec::Rcr { gamma: gamma.unwrap() },
    })
}

impl EstimatorArgs {
    fn spec(&self) -> CliResult<EstimatorSpec> {
        let gamma = self.gamma.as_deref().map(parse_weights).transpose()?;
        estimator_spec(self.estimator, gamma, self.lambda)
    }
}

fn format_or(out: &OutputArgs, default: Format, allowed: &[Format]) -> CliResult<Format> {
    let f = out.format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        usage(format!("--format {f:?} is not available for this command").to_lowercase())
    }
}

/// Every JSON document starts with the schema version and the command name.
#[derive(Serialize)]
struct Envelope<T: Serialize> {
    schema: u32,
    command: &'static str,
    #[serde(flatten)]
    body: T,
}

fn to_json<T: Serialize>(command: &'static str, body: T) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope { schema: SCHEMA, command, body })
        .expect("plain data serializes");
    s.push('\n');
    s
}

fn load(data: &DataArgs) -> CliResult<Dataset> {
    Ok(Dataset::load_csv(&data.input, data.response.as_deref())?)
}

fn fit_table(names: &[String], fit: &FitResult, label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "estimator\t{label}");
    let _ = writeln!(s, "alpha\t{}", fit.alpha);
    for (name, b) in names.iter().zip(&fit.beta) {
        let _ = writeln!(s, "beta_{name}\t{b}");
    }
    let _ = writeln!(s, "objective\t{}", fit.objective_value);
    let _ = writeln!(s, "converged\t{}", fit.converged);
    s
}

fn cmd_fit(a: &FitArgs) -> CliResult<String> {
    let spec = a.estimator.spec()?;
    let format = format_or(&a.out, Format::Json, &[Format::Json, Format::Table])?;
    let data = load(&a.data)?;
    let fit = spec.fit(&data, &a.weights.config())?;
    Ok(match format {
        Format::Table => fit_table(data.x_names(), &fit, &spec.label()),
        _ => to_json("fit", json!({
            "estimator": spec.label(),
            "x_names": data.x_names(),
            "y_name": data.y_name(),
            "n": data.n(),
            "fit": fit,
        })),
    })
}

fn interval_line(threshold: f64, iv: &Option<GammaInterval>) -> String {
    match iv {
        Some(iv) => format!(
            "threshold {threshold}: gamma [{}, {}], beta {}..{}",
            iv.gamma_lo,
            iv.gamma_hi,
            iv.beta_min(),
            iv.beta_max()
        ),
        None => format!("threshold {threshold}: no gamma reaches it"),
    }
}

/// Returns the primary output plus an optional note for stderr.
fn cmd_curve(a: &CurveArgs) -> CliResult<(String, Option<String>)> {
    let format = format_or(&a.out, Format::Tsv, &[Format::Tsv, Format::Json])?;
    if a.grid < 2 {
        return usage("--grid must be at least 2");
    }
    if let Some(t) = a.threshold {
        if !(0.0..=1.0).contains(&t) {
            return usage("--threshold must lie in [0, 1]");
        }
    }
    let lists = match &a.gamma {
        Some(s) => Some(s.split(';').map(parse_weights).collect::<CliResult<Vec<_>>>()?),
        None => None,
    };
    let data = load(&a.data)?;
    let w = a.weights.config();
    let curve = match lists {
        Some(l) => efficiency_curve_weights(&data, &l, &w)?,
        None if data.p() == 1 => efficiency_curve(&data, a.grid, &w)?,
        None => return usage("with more than one regressor, pass the weight vectors through --gamma"),
    };
    let interval = a.threshold.map(|t| (t, select_gamma_interval(&curve, t)));
    Ok(match format {
        Format::Json => {
            let iv = interval.map(|(t, iv)| json!({ "threshold": t, "interval": iv }));
            (to_json("curve", json!({ "curve": curve, "selection": iv })), None)
        }
        _ => (curve.to_tsv(), interval.map(|(t, iv)| interval_line(t, &iv))),
    })
}

fn cmd_bootstrap(a: &BootstrapArgs) -> CliResult<String> {
    let spec = a.estimator.spec()?;
    let format = format_or(&a.out, Format::Json, &[Format::Json, Format::Table])?;
    if a.b < 2 {
        return usage("--B must be at least 2");
    }
    if !(a.level > 0.0 && a.level < 1.0) {
        return usage("--level must lie in (0, 1)");
    }
    let data = load(&a.data)?;
    let r = bootstrap(&data, &spec, &a.weights.config(), a.b, a.seed, a.level)?;
    Ok(match format {
        Format::Table => {
            let mut s = fit_table(data.x_names(), &r.estimate, &spec.label());
            let mut names = vec!["alpha".to_string()];
            names.extend(data.x_names().iter().map(|n| format!("beta_{n}")));
            for (name, [lo, hi]) in names.iter().zip(&r.ci) {
                let _ = writeln!(s, "ci_{name}\t{lo}\t{hi}");
            }
            for (name, se) in data.x_names().iter().zip(r.slope_std_errors()) {
                let _ = writeln!(s, "se_beta_{name}\t{se}");
            }
            let _ = writeln!(s, "failures\t{}/{}", r.failures, r.b);
            s
        }
        _ => to_json("bootstrap", json!({
            "estimator": spec.label(),
            "result": r,
        })),
    })
}

fn read_scenario(path: &Path) -> CliResult<ScenarioSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| RcrError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Core(RcrError::InvalidInput(format!("{}: {e}", path.display()))))
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<String> {
    let format = format_or(&a.out, Format::Json, &[Format::Json, Format::Table])?;
    if a.replicates < 2 {
        return usage("--replicates must be at least 2");
    }
    let mut spec = match (&a.input, a.scenario) {
        (Some(p), _) => read_scenario(p)?,
        (None, Some(c)) => {
            let p = Preset::from_letter(c).ok_or_else(|| CliError::Usage(format!("unknown scenario '{c}'")))?;
            ScenarioSpec::preset(p, a.n, a.seed)
        }
        (None, None) => return usage("simulate needs --input <scenario.json> or --scenario <a|b|c|d>"),
    };
    spec.seed = a.seed;
    let gamma = a.gamma.map(GammaWeights::simple).transpose().map_err(|e| CliError::Usage(format!("--gamma: {e}")))?;
    let estimators = a
        .estimator
        .iter()
        .map(|k| {
            let g = if *k == Kind::Rcr { gamma.clone() } else { None };
            let l = if *k == Kind::Deming { a.lambda } else { None };
            estimator_spec(*k, g, l)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let reference = match a.reference {
        RefArg::TrueBeta => Reference::TrueBeta,
        RefArg::CleanDeming => Reference::CleanDeming,
    };
    let report = run_study(&spec, &estimators, a.replicates, reference, &a.weights.config())?;
    Ok(match format {
        Format::Table => report.to_table(),
        _ => to_json("simulate", json!({ "report": report })),
    })
}

fn emit(out: &OutputArgs, text: &str) -> CliResult<()> {
    match &out.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|source| CliError::Core(RcrError::Io { path: path.to_path_buf(), source })),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return usage("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Fit(a) => emit(&a.out, &cmd_fit(a)?),
        Command::Curve(a) => {
            let (text, note) = cmd_curve(a)?;
            emit(&a.out, &text)?;
            if let Some(n) = note {
                eprintln!("{n}");
            }
            Ok(())
        }
        Command::Bootstrap(a) => emit(&a.out, &cmd_bootstrap(a)?),
        Command::Simulate(a) => emit(&a.out, &cmd_simulate(a)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("rcr: usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Core(e)) => {
            let one_line = e.to_string().replace('\n', " ");
            match e.kind() {
                ErrorKind::Data => {
                    eprintln!("rcr: data error: {one_line}");
                    ExitCode::from(3)
                }
                ErrorKind::Numerical => {
                    eprintln!("rcr: numerical error: {one_line}");
                    ExitCode::from(4)
                }
            }
        }
    }
}
