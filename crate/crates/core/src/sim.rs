//! Monte Carlo harness: bias, variance and MSE of the estimators on the
//! benchmark models, negative-value shares, and timing.
//!
//! Every replication draws one sample from its own seed stream and evaluates
//! all requested estimators on that same sample, so comparisons between
//! estimators are paired. Results do not depend on the number of workers.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combiner::{bootstrap_sweep, lambda_opt, moments_from_draws, BandwidthRule, BootstrapConfig};
use crate::distance::{NegativePolicy, SquaredStats, VCentering};
use crate::error::{DcorError, Result};
use crate::fast::{dcor_auto, statistics, Dispatch, PointEstimator, SortedWorkspace};
use crate::models::{exact_dcor, sample_model, ModelSpec};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    V,
    USigned,
    UAbs,
    UTrunc,
    /// Combination with a bootstrap-estimated weight per replication.
    Combo(NegativePolicy),
    /// Combination with the weight computed from the Monte Carlo moments of
    /// the replications themselves (an oracle; needs the true value).
    OracleCombo(NegativePolicy),
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        use NegativePolicy::*;
        match self {
            EstimatorKind::V => "dcor_v",
            EstimatorKind::USigned => "dcor_u",
            EstimatorKind::UAbs => "dcor_u_abs",
            EstimatorKind::UTrunc => "dcor_u_trunc",
            EstimatorKind::Combo(Signed) => "combo",
            EstimatorKind::Combo(Abs) => "combo_abs",
            EstimatorKind::Combo(Trunc) => "combo_trunc",
            EstimatorKind::OracleCombo(Signed) => "oracle_combo",
            EstimatorKind::OracleCombo(Abs) => "oracle_combo_abs",
            EstimatorKind::OracleCombo(Trunc) => "oracle_combo_trunc",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::all().into_iter().find(|e| e.name() == name)
    }

    pub fn all() -> Vec<Self> {
        let mut out = vec![EstimatorKind::V, EstimatorKind::USigned, EstimatorKind::UAbs, EstimatorKind::UTrunc];
        for p in NegativePolicy::ALL {
            out.push(EstimatorKind::Combo(p));
        }
        for p in NegativePolicy::ALL {
            out.push(EstimatorKind::OracleCombo(p));
        }
        out
    }

    /// Negative-value policy of the U component, if any.
    pub fn policy(&self) -> Option<NegativePolicy> {
        match *self {
            EstimatorKind::V => None,
            EstimatorKind::USigned => Some(NegativePolicy::Signed),
            EstimatorKind::UAbs => Some(NegativePolicy::Abs),
            EstimatorKind::UTrunc => Some(NegativePolicy::Trunc),
            EstimatorKind::Combo(p) | EstimatorKind::OracleCombo(p) => Some(p),
        }
    }

    pub fn min_n(&self) -> usize {
        if self.policy().is_some() {
            4
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: ModelSpec,
    pub n: usize,
    pub reps: usize,
    pub estimators: Vec<EstimatorKind>,
    /// Used by `Combo` estimators. Its `seed` and `policy` are overridden per
    /// replication and estimator.
    pub bootstrap: BootstrapConfig,
    pub seed: u64,
    /// Worker threads; 0 lets the thread pool choose.
    pub workers: usize,
    pub v_centering: VCentering,
    pub dispatch: Dispatch,
    /// Keep per-replication estimates and seeds in the report.
    pub retain: bool,
}

impl SimConfig {
    pub fn new(model: ModelSpec, n: usize, reps: usize, estimators: Vec<EstimatorKind>, seed: u64) -> Self {
        Self {
            model,
            n,
            reps,
            estimators,
            bootstrap: BootstrapConfig::default(),
            seed,
            workers: 0,
            v_centering: VCentering::Classic,
            dispatch: Dispatch::default(),
            retain: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.reps < 2 {
            return Err(DcorError::InvalidParameter(format!("reps must be at least 2, got {}", self.reps)));
        }
        if self.estimators.is_empty() {
            return Err(DcorError::InvalidParameter("no estimators requested".into()));
        }
        for e in &self.estimators {
            if self.n < e.min_n() {
                return Err(DcorError::SampleTooSmall { what: e.name(), n: self.n, min: e.min_n() });
            }
        }
        if self.estimators.iter().any(|e| matches!(e, EstimatorKind::Combo(_))) {
            self.bootstrap.validate()?;
        }
        Ok(())
    }
}

/// Seed of replication `r`.
pub fn rep_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, r as u64)
}

/// Bootstrap seed of replication `r` (a child of the replication seed).
pub fn rep_bootstrap_seed(seed: u64, r: usize) -> u64 {
    derive_seed(rep_seed(seed, r), 1)
}

/// MSE of one grid bandwidth for a combo estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub estimator: EstimatorKind,
    pub bandwidth: f64,
    pub mean_lambda: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRow {
    pub estimator: EstimatorKind,
    pub mean: f64,
    pub bias: f64,
    /// Denominator `reps`, so that `mse = variance + bias²`.
    pub variance: f64,
    pub mse: f64,
    /// Percentage of replications whose squared U statistic was negative;
    /// `None` for the V estimator.
    pub pct_negative: Option<f64>,
    /// Mean bootstrap weight, or the oracle weight.
    pub lambda_hat: Option<f64>,
    /// Bandwidth chosen for a gridded combo estimator.
    pub bandwidth: Option<f64>,
    pub estimates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub model: ModelSpec,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub dcor_true: f64,
    pub dcor_true_std_error: f64,
    pub rows: Vec<EstimatorRow>,
    pub bandwidth_sweep: Vec<SweepRow>,
    pub elapsed: Duration,
    pub rep_seeds: Option<Vec<u64>>,
}

impl SimReport {
    pub fn row(&self, e: EstimatorKind) -> Option<&EstimatorRow> {
        self.rows.iter().find(|r| r.estimator == e)
    }
}

/// Neumaier-compensated sum.
#[derive(Debug, Default, Clone, Copy)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut k = KahanSum::default();
    values.into_iter().for_each(|v| k.add(v));
    k.total()
}

/// Summary metrics of `values` against `truth`.
pub struct Metrics {
    pub mean: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
}

pub fn metrics(values: &[f64], truth: f64) -> Metrics {
    let r = values.len() as f64;
    let mean = sum(values.iter().copied()) / r;
    let variance = sum(values.iter().map(|v| (v - mean) * (v - mean))) / r;
    let mse = sum(values.iter().map(|v| (v - truth) * (v - truth))) / r;
    Metrics { mean, bias: mean - truth, variance, mse }
}

/// Everything computed on one replication.
#[derive(Debug, Clone)]
struct RepOutcome {
    u: SquaredStats,
    v: f64,
    /// Per combo estimator in config order: `(lambda_hat, value)` per bandwidth.
    combos: Vec<Vec<(f64, f64)>>,
}

fn u_value(u: &SquaredStats, p: NegativePolicy) -> Result<f64> {
    Ok(u.u_estimate(p)?.value)
}

fn run_rep(cfg: &SimConfig, r: usize, ws: &mut SortedWorkspace) -> Result<RepOutcome> {
    let sample = sample_model(cfg.model, cfg.n, rep_seed(cfg.seed, r))?;
    let needs_u = cfg.estimators.iter().any(|e| e.policy().is_some());
    let (u, v) = if needs_u {
        let (u, v, _) = statistics(&sample, cfg.v_centering, cfg.dispatch, ws)?;
        (u, v.v_estimate()?.value)
    } else {
        let (est, _) = dcor_auto(&sample, PointEstimator::V(cfg.v_centering), cfg.dispatch)?;
        let stats = SquaredStats { cov2_xy: f64::NAN, var2_x: f64::NAN, var2_y: f64::NAN };
        (stats, est.value)
    };
    let mut combos = Vec::new();
    for e in &cfg.estimators {
        if let EstimatorKind::Combo(policy) = *e {
            let bcfg = BootstrapConfig { policy, seed: rep_bootstrap_seed(cfg.seed, r), ..cfg.bootstrap.clone() };
            let bandwidths = bcfg.bandwidths_for(&sample);
            let uv = u_value(&u, policy)?;
            let per_h = bootstrap_sweep(&sample, &bcfg, &bandwidths)?
                .into_iter()
                .map(|m| (m.lambda0, m.lambda0 * uv + (1.0 - m.lambda0) * v))
                .collect();
            combos.push(per_h);
        }
    }
    Ok(RepOutcome { u, v, combos })
}

fn grid_values(cfg: &SimConfig) -> Option<Vec<f64>> {
    match &cfg.bootstrap.bandwidth {
        BandwidthRule::Grid(g) => Some(g.clone()),
        _ => None,
    }
}

/// Runs the simulation described by `cfg`.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let oracle = exact_dcor(cfg.model)?;
    let truth = oracle.dcor;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| DcorError::InvalidParameter(format!("thread pool: {e}")))?;
    let outcomes: Vec<RepOutcome> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map_init(SortedWorkspace::default, |ws, r| run_rep(cfg, r, ws))
            .collect::<Result<_>>()
    })?;

    let pct_negative = 100.0 * outcomes.iter().filter(|o| o.u.cov2_xy < 0.0).count() as f64 / cfg.reps as f64;
    let v_values: Vec<f64> = outcomes.iter().map(|o| o.v).collect();
    let grid = grid_values(cfg);
    let mut rows = Vec::with_capacity(cfg.estimators.len());
    let mut sweep = Vec::new();
    let mut combo_idx = 0;
    for &e in &cfg.estimators {
        let (values, lambda_hat, bandwidth) = match e {
            EstimatorKind::V => (v_values.clone(), None, None),
            EstimatorKind::USigned | EstimatorKind::UAbs | EstimatorKind::UTrunc => {
                let p = e.policy().expect("U estimator");
                (outcomes.iter().map(|o| u_value(&o.u, p)).collect::<Result<Vec<_>>>()?, None, None)
            }
            EstimatorKind::OracleCombo(p) => {
                let u_values = outcomes.iter().map(|o| u_value(&o.u, p)).collect::<Result<Vec<_>>>()?;
                let lambda = lambda_opt(&moments_from_draws(&u_values, &v_values, truth, 0))?;
                let values = u_values.iter().zip(&v_values).map(|(u, v)| lambda * u + (1.0 - lambda) * v).collect();
                (values, Some(lambda), None)
            }
            EstimatorKind::Combo(_) => {
                let nh = outcomes[0].combos[combo_idx].len();
                let mut best: Option<(f64, usize)> = None;
                for h in 0..nh {
                    let values: Vec<f64> = outcomes.iter().map(|o| o.combos[combo_idx][h].1).collect();
                    let mse = metrics(&values, truth).mse;
                    if let Some(g) = &grid {
                        let mean_lambda = sum(outcomes.iter().map(|o| o.combos[combo_idx][h].0)) / cfg.reps as f64;
                        sweep.push(SweepRow { estimator: e, bandwidth: g[h], mean_lambda, mse });
                    }
                    if best.is_none_or(|(m, _)| mse < m) {
                        best = Some((mse, h));
                    }
                }
                let h = best.expect("nonempty bandwidth list").1;
                let values: Vec<f64> = outcomes.iter().map(|o| o.combos[combo_idx][h].1).collect();
                let lambda = sum(outcomes.iter().map(|o| o.combos[combo_idx][h].0)) / cfg.reps as f64;
                combo_idx += 1;
                (values, Some(lambda), grid.as_ref().map(|g| g[h]))
            }
        };
        let m = metrics(&values, truth);
        rows.push(EstimatorRow {
            estimator: e,
            mean: m.mean,
            bias: m.bias,
            variance: m.variance,
            mse: m.mse,
            pct_negative: e.policy().map(|_| pct_negative),
            lambda_hat,
            bandwidth,
            estimates: cfg.retain.then_some(values),
        });
    }
    Ok(SimReport {
        model: cfg.model,
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        dcor_true: truth,
        dcor_true_std_error: oracle.std_error,
        rows,
        bandwidth_sweep: sweep,
        elapsed: start.elapsed(),
        rep_seeds: cfg.retain.then(|| (0..cfg.reps).map(|r| rep_seed(cfg.seed, r)).collect()),
    })
}

/// Percentage of replications whose squared U statistic is negative.
pub fn negative_share(cfg: &SimConfig) -> Result<f64> {
    let row_kind = cfg
        .estimators
        .iter()
        .copied()
        .find(|e| e.policy().is_some())
        .ok_or_else(|| DcorError::InvalidParameter("negative share needs a U-based estimator".into()))?;
    let cfg = SimConfig { estimators: vec![row_kind], ..cfg.clone() };
    let report = run_simulation(&cfg)?;
    Ok(report.rows[0].pct_negative.expect("U-based row"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub estimator: EstimatorKind,
    pub reps: usize,
    pub seconds: f64,
    pub fast_path: bool,
}

/// Wall-clock totals for `reps` evaluations of dCorV and dCorU at each size,
/// on fresh samples from the bivariate normal model with `ρ = 0.5`. Sampling
/// is excluded from the timings.
pub fn bench_timing(sizes: &[usize], reps: usize, force_naive: bool, seed: u64) -> Result<Vec<TimingRow>> {
    if sizes.is_empty() {
        return Err(DcorError::InvalidParameter("no sizes given".into()));
    }
    if reps == 0 {
        return Err(DcorError::InvalidParameter("reps must be positive".into()));
    }
    let dispatch = if force_naive { Dispatch::force_naive() } else { Dispatch::always_fast() };
    let model = ModelSpec::Bvn { rho: 0.5 };
    let mut rows = Vec::new();
    for (si, &n) in sizes.iter().enumerate() {
        let samples = (0..reps)
            .map(|r| sample_model(model, n, derive_seed(seed, (si * reps + r) as u64)))
            .collect::<Result<Vec<_>>>()?;
        for (kind, est) in [
            (EstimatorKind::V, PointEstimator::V(VCentering::Classic)),
            (EstimatorKind::USigned, PointEstimator::U(NegativePolicy::Signed)),
        ] {
            let start = Instant::now();
            for s in &samples {
                std::hint::black_box(dcor_auto(s, est, dispatch)?);
            }
            rows.push(TimingRow { n, estimator: kind, reps, seconds: start.elapsed().as_secs_f64(), fast_path: !force_naive });
        }
    }
    Ok(rows)
}
