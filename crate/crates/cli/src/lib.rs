//! Command-line front end: estimate from CSV data, query the model oracles,
//! run simulation campaigns and benchmarks.

pub mod dataset;
pub mod plot;
pub mod report;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dcorkit::combiner::{dcor_combo, BandwidthRule, BootstrapConfig, DEFAULT_BANDWIDTH_GRID};
use dcorkit::distance::{NegativePolicy, VCentering};
use dcorkit::fast::{dcor_auto, Dispatch, PointEstimator, DEFAULT_FAST_THRESHOLD};
use dcorkit::models::{exact_dcor_with_budget, ModelSpec, DEFAULT_ORACLE_BUDGET};
use dcorkit::sim::{bench_timing, run_simulation, EstimatorKind, SimConfig};
use dcorkit::DcorError;
use serde::Serialize;

/// Sample sizes at or above this need `--long`.
pub const LONG_N: usize = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Precondition(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<DcorError> for CliError {
    fn from(e: DcorError) -> Self {
        match e {
            DcorError::SampleTooSmall { what, n, min: 4 } => CliError::Precondition(format!(
                "{what} needs n >= 4 (the U-statistic divides by n - 3), got n = {n}"
            )),
            DcorError::SampleTooSmall { .. } => CliError::Precondition(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "dcorkit", version, about = "Distance correlation estimators, oracles and simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the distance correlation of a CSV dataset.
    Estimate(EstimateArgs),
    /// Print the exact distance correlation of a benchmark model.
    Oracle(OracleArgs),
    /// Run a Monte Carlo campaign and write a CSV report.
    Simulate(SimulateArgs),
    /// Time the estimators on bivariate normal samples.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    V,
    U,
    UAbs,
    UTrunc,
    Combo,
    ComboAbs,
    ComboTrunc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Fgm,
    Bvn,
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Centering {
    Classic,
    ZeroDiagonal,
}

impl From<Centering> for VCentering {
    fn from(c: Centering) -> Self {
        match c {
            Centering::Classic => VCentering::Classic,
            Centering::ZeroDiagonal => VCentering::ZeroDiagonal,
        }
    }
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    /// Bootstrap replications for combination estimators.
    #[arg(long = "bootstrap", default_value_t = 1000)]
    pub replications: usize,
    /// `silverman`, `h1,h2`, `grid` (0.0025 .. 0.32) or `grid:a,b,...`.
    #[arg(long, default_value = "silverman")]
    pub bandwidth: String,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Numeric CSV: `xdim` X columns followed by `ydim` Y columns.
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "v")]
    pub method: Method,
    #[arg(long, default_value_t = 1)]
    pub xdim: usize,
    #[arg(long, default_value_t = 1)]
    pub ydim: usize,
    /// Treat the first row as a header. Detected automatically when omitted.
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[arg(long, value_enum, default_value = "classic")]
    pub centering: Centering,
    #[command(flatten)]
    pub bootstrap: BootstrapArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the result as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub model: Family,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub k: Option<u32>,
    /// Monte Carlo budget (sample points) for the nonlinear model.
    #[arg(long, default_value_t = DEFAULT_ORACLE_BUDGET)]
    pub budget: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: Family,
    /// Comma-separated θ values (FGM).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Vec<f64>,
    /// Comma-separated ρ values (bivariate normal).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rho: Vec<f64>,
    /// Comma-separated k values (nonlinear model).
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<u32>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Comma-separated estimators: v, u, u-abs, u-trunc, combo, combo-abs,
    /// combo-trunc, oracle-combo, oracle-combo-abs, oracle-combo-trunc.
    #[arg(long, value_delimiter = ',', default_value = "v,u,u-abs,u-trunc")]
    pub estimators: Vec<String>,
    #[command(flatten)]
    pub bootstrap: BootstrapArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "DCORKIT_WORKERS", default_value_t = 0)]
    pub workers: usize,
    #[arg(long, value_enum, default_value = "classic")]
    pub centering: Centering,
    /// Smallest univariate n routed to the O(n log n) path.
    #[arg(long, default_value_t = DEFAULT_FAST_THRESHOLD)]
    pub fast_threshold: usize,
    /// Allow n >= 10000.
    #[arg(long)]
    pub long: bool,
    /// Leave `elapsed_ms` empty so reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Render MSE against the true dCor as an SVG chart.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Write the per-bandwidth MSE of gridded combination estimators here.
    #[arg(long)]
    pub bandwidth_sweep: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "100,1000")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Use the quadratic matrix path for every size.
    #[arg(long)]
    pub force_naive: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Returns the given seed, or draws one and reports it.
fn resolve_seed(seed: Option<u64>, log: &mut dyn Write) -> CliResult<u64> {
    match seed {
        Some(s) => Ok(s),
        None => {
            let s = rand::random::<u64>();
            writeln!(log, "seed: {s}").map_err(|e| CliError::Io(e.to_string()))?;
            Ok(s)
        }
    }
}

pub fn parse_bandwidth(spec: &str) -> CliResult<BandwidthRule> {
    let bad = || CliError::Input(format!("invalid --bandwidth '{spec}'; expected silverman, h1,h2, grid or grid:a,b,..."));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    match spec.trim() {
        "silverman" => Ok(BandwidthRule::Silverman),
        "grid" => Ok(BandwidthRule::Grid(DEFAULT_BANDWIDTH_GRID.to_vec())),
        s if s.starts_with("grid:") => Ok(BandwidthRule::Grid(s[5..].split(',').map(num).collect::<CliResult<_>>()?)),
        s => match s.split(',').collect::<Vec<_>>()[..] {
            [h1, h2] => Ok(BandwidthRule::Fixed { h1: num(h1)?, h2: num(h2)? }),
            [h] => {
                let h = num(h)?;
                Ok(BandwidthRule::Fixed { h1: h, h2: h })
            }
            _ => Err(bad()),
        },
    }
}

pub fn parse_estimator(name: &str) -> CliResult<EstimatorKind> {
    use NegativePolicy::*;
    Ok(match name.trim() {
        "v" => EstimatorKind::V,
        "u" => EstimatorKind::USigned,
        "u-abs" => EstimatorKind::UAbs,
        "u-trunc" => EstimatorKind::UTrunc,
        "combo" => EstimatorKind::Combo(Signed),
        "combo-abs" => EstimatorKind::Combo(Abs),
        "combo-trunc" => EstimatorKind::Combo(Trunc),
        "oracle-combo" => EstimatorKind::OracleCombo(Signed),
        "oracle-combo-abs" => EstimatorKind::OracleCombo(Abs),
        "oracle-combo-trunc" => EstimatorKind::OracleCombo(Trunc),
        other => EstimatorKind::from_name(other).ok_or_else(|| CliError::Input(format!("unknown estimator '{other}'")))?,
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

/// Formats with at least six significant digits.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let decimals = (5 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn run(cli: Cli, out: &mut dyn Write, log: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Estimate(a) => cmd_estimate(a, out, log),
        Command::Oracle(a) => cmd_oracle(a, out, log),
        Command::Simulate(a) => cmd_simulate(a, out, log),
        Command::Bench(a) => cmd_bench(a, out, log),
    }
}

#[derive(Debug, Serialize)]
struct EstimateOutput {
    method: String,
    n: usize,
    dcor: f64,
    variant: String,
    cov2_xy: f64,
    var2_x: f64,
    var2_y: f64,
    u_statistic_negative: bool,
    degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    moments: Option<dcorkit::MomentSummary>,
}

fn w(out: &mut dyn Write, s: String) -> CliResult<()> {
    writeln!(out, "{s}").map_err(|e| CliError::Io(e.to_string()))
}

fn cmd_estimate(a: EstimateArgs, out: &mut dyn Write, log: &mut dyn Write) -> CliResult<()> {
    let spec = dataset::DatasetSpec { xdim: a.xdim, ydim: a.ydim, header: a.header.then_some(true), delimiter: a.delimiter };
    let sample = dataset::read_dataset(&a.dataset, &spec)?;
    let mode: VCentering = a.centering.into();
    let policy = match a.method {
        Method::U | Method::Combo => NegativePolicy::Signed,
        Method::UAbs | Method::ComboAbs => NegativePolicy::Abs,
        Method::UTrunc | Method::ComboTrunc => NegativePolicy::Trunc,
        Method::V => NegativePolicy::Signed,
    };
    let method_name = a.method.to_possible_value().expect("value").get_name().to_string();
    let (estimate, moments, seed) = match a.method {
        Method::V => (dcor_auto(&sample, PointEstimator::V(mode), Dispatch::default())?.0, None, None),
        Method::U | Method::UAbs | Method::UTrunc => {
            (dcor_auto(&sample, PointEstimator::U(policy), Dispatch::default())?.0, None, None)
        }
        Method::Combo | Method::ComboAbs | Method::ComboTrunc => {
            let seed = resolve_seed(a.seed, log)?;
            let cfg = BootstrapConfig {
                replications: a.bootstrap.replications,
                bandwidth: parse_bandwidth(&a.bootstrap.bandwidth)?,
                policy,
                seed,
                v_centering: mode,
                ..Default::default()
            };
            let c = dcor_combo(&sample, &cfg)?;
            (c.estimate, Some(c.moments), Some(seed))
        }
    };
    let result = EstimateOutput {
        method: method_name,
        n: sample.n(),
        dcor: estimate.value,
        variant: format!("{:?}", estimate.variant),
        cov2_xy: estimate.cov2_xy,
        var2_x: estimate.var2_x,
        var2_y: estimate.var2_y,
        u_statistic_negative: estimate.was_negative,
        degenerate: estimate.degenerate,
        seed,
        moments,
    };
    w(out, format!("method: {}", result.method))?;
    w(out, format!("variant: {}", result.variant))?;
    w(out, format!("n: {}", result.n))?;
    w(out, format!("dcor: {}", result.dcor))?;
    w(out, format!("cov2_xy: {}", result.cov2_xy))?;
    if a.method != Method::V {
        w(out, format!("u_statistic_negative: {}", result.u_statistic_negative))?;
    }
    if result.degenerate {
        w(out, "degenerate: true (a margin has zero distance variance)".into())?;
    }
    if let Some(m) = &result.moments {
        w(out, format!("lambda_hat: {}", m.lambda0))?;
        if let Some((h1, h2)) = m.bandwidth {
            w(out, format!("bandwidth: {h1},{h2}"))?;
        }
        w(out, format!("var_u: {}", m.var_u))?;
        w(out, format!("var_v: {}", m.var_v))?;
        w(out, format!("bias_u: {}", m.bias_u))?;
        w(out, format!("bias_v: {}", m.bias_v))?;
        w(out, format!("cov_uv: {}", m.cov_uv))?;
    }
    if let Some(path) = &a.json {
        let mut f = create(path)?;
        serde_json::to_writer_pretty(&mut f, &result).map_err(|e| CliError::io(path, e))?;
        writeln!(f).and_then(|_| f.flush()).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

fn model_from(family: Family, theta: Option<f64>, rho: Option<f64>, k: Option<u32>) -> CliResult<ModelSpec> {
    let missing = |flag: &str| CliError::Input(format!("--model {family:?} needs --{flag}").to_lowercase());
    let spec = match family {
        Family::Fgm => ModelSpec::Fgm { theta: theta.ok_or_else(|| missing("theta"))? },
        Family::Bvn => ModelSpec::Bvn { rho: rho.ok_or_else(|| missing("rho"))? },
        Family::Nonlinear => ModelSpec::Nonlinear { k: k.ok_or_else(|| missing("k"))? },
    };
    spec.validate()?;
    Ok(spec)
}

fn cmd_oracle(a: OracleArgs, out: &mut dyn Write, log: &mut dyn Write) -> CliResult<()> {
    let spec = model_from(a.model, a.theta, a.rho, a.k)?;
    let seed = match spec {
        ModelSpec::Nonlinear { .. } => resolve_seed(a.seed, log)?,
        _ => a.seed.unwrap_or(0),
    };
    let r = exact_dcor_with_budget(spec, a.budget, seed)?;
    w(out, format!("model: {}", spec.family()))?;
    w(out, format!("param: {}", spec.param()))?;
    w(out, format!("dcor: {}", sig6(r.dcor)))?;
    w(out, format!("dcov2: {}", sig6(r.dcov2)))?;
    w(out, format!("method: {}", r.method.name()))?;
    if r.std_error > 0.0 {
        w(out, format!("std_error: {}", sig6(r.std_error)))?;
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write, log: &mut dyn Write) -> CliResult<()> {
    let models: Vec<ModelSpec> = match a.model {
        Family::Fgm => a.theta.iter().map(|&t| ModelSpec::Fgm { theta: t }).collect(),
        Family::Bvn => a.rho.iter().map(|&r| ModelSpec::Bvn { rho: r }).collect(),
        Family::Nonlinear => a.k.iter().map(|&k| ModelSpec::Nonlinear { k }).collect(),
    };
    if models.is_empty() {
        let flag = match a.model {
            Family::Fgm => "--theta",
            Family::Bvn => "--rho",
            Family::Nonlinear => "--k",
        };
        return Err(CliError::Input(format!("no parameter values given; use {flag}")));
    }
    for m in &models {
        m.validate()?;
    }
    if let Some(&n) = a.n.iter().find(|&&n| n >= LONG_N && !a.long) {
        return Err(CliError::Input(format!("n = {n} is a long run; pass --long to allow n >= {LONG_N}")));
    }
    let estimators = a.estimators.iter().map(|e| parse_estimator(e)).collect::<CliResult<Vec<_>>>()?;
    let seed = resolve_seed(a.seed, log)?;
    let bootstrap = BootstrapConfig {
        replications: a.bootstrap.replications,
        bandwidth: parse_bandwidth(&a.bootstrap.bandwidth)?,
        v_centering: a.centering.into(),
        dispatch: Dispatch { fast_threshold: a.fast_threshold },
        ..Default::default()
    };
    let mut reports = Vec::new();
    for &model in &models {
        for &n in &a.n {
            let cfg = SimConfig {
                bootstrap: bootstrap.clone(),
                workers: a.workers,
                v_centering: a.centering.into(),
                dispatch: Dispatch { fast_threshold: a.fast_threshold },
                ..SimConfig::new(model, n, a.reps, estimators.clone(), seed)
            };
            let _ = writeln!(log, "simulating {} {} n={n} reps={}", model.family(), model.param(), a.reps);
            reports.push(run_simulation(&cfg)?);
        }
    }
    let rows = report::rows_from_reports(&reports, !a.no_timing);
    match &a.out {
        Some(path) => {
            let mut f = create(path)?;
            report::write_csv(&mut f, &rows).map_err(|e| CliError::io(path, e))?;
            f.flush().map_err(|e| CliError::io(path, e))?;
        }
        None => report::write_csv(out, &rows).map_err(|e| CliError::Io(e.to_string()))?,
    }
    if let Some(path) = &a.bandwidth_sweep {
        let mut f = create(path)?;
        report::write_sweep_csv(&mut f, &reports).map_err(|e| CliError::io(path, e))?;
        f.flush().map_err(|e| CliError::io(path, e))?;
    }
    if let Some(path) = &a.plot {
        std::fs::write(path, plot::mse_chart(&rows)).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs, out: &mut dyn Write, log: &mut dyn Write) -> CliResult<()> {
    let seed = resolve_seed(a.seed, log)?;
    let rows = bench_timing(&a.sizes, a.reps, a.force_naive, seed)?;
    let path_name = if a.force_naive { "naive" } else { "fast" };
    w(out, format!("{:>8}  {:<10} {:>6}  {:>12}  path", "n", "estimator", "reps", "seconds"))?;
    for r in &rows {
        w(out, format!("{:>8}  {:<10} {:>6}  {:>12.6}  {path_name}", r.n, r.estimator.name(), r.reps, r.seconds))?;
    }
    for pair in a.sizes.windows(2) {
        for e in [EstimatorKind::V, EstimatorKind::USigned] {
            let t = |n: usize| rows.iter().find(|r| r.n == n && r.estimator == e).map(|r| r.seconds).unwrap_or(f64::NAN);
            w(out, format!("ratio {} t({})/t({}) = {:.2}", e.name(), pair[1], pair[0], t(pair[1]) / t(pair[0])))?;
        }
    }
    if let Some(path) = &a.out {
        let mut f = create(path)?;
        report::write_bench_csv(&mut f, &rows, path_name).map_err(|e| CliError::io(path, e))?;
        f.flush().map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}
