//! Benchmark dependence models: samplers and ground-truth distance correlation.
//!
//! * FGM copula with parameter `θ ∈ [-1, 1]`, uniform margins.
//! * Standard bivariate normal with correlation `ρ ∈ [-1, 1]`.
//! * A parabolic ridge on the unit square with density proportional to
//!   `[1 - (y - 4(x - 1/2)²)²]^k`; dependence grows with `k`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DcorError, Result};
use crate::fast::{statistics, Dispatch, SortedWorkspace};
use crate::distance::VCentering;
use crate::rng::{derive_seed, from_seed};
use crate::sample::PairedSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Fgm { theta: f64 },
    Bvn { rho: f64 },
    Nonlinear { k: u32 },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            ModelSpec::Fgm { theta } => ("theta", theta),
            ModelSpec::Bvn { rho } => ("rho", rho),
            ModelSpec::Nonlinear { .. } => return Ok(()),
        };
        if !(-1.0..=1.0).contains(&v) {
            return Err(DcorError::InvalidParameter(format!("{name} must lie in [-1, 1], got {v}")));
        }
        Ok(())
    }

    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Fgm { .. } => "fgm",
            ModelSpec::Bvn { .. } => "bvn",
            ModelSpec::Nonlinear { .. } => "nonlinear",
        }
    }

    /// The family parameter (`θ`, `ρ` or `k`) as a real number.
    pub fn param(&self) -> f64 {
        match *self {
            ModelSpec::Fgm { theta } => theta,
            ModelSpec::Bvn { rho } => rho,
            ModelSpec::Nonlinear { k } => f64::from(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    ClosedForm,
    Numeric,
}

impl OracleMethod {
    pub fn name(self) -> &'static str {
        match self {
            OracleMethod::ClosedForm => "closed_form",
            OracleMethod::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub dcor: f64,
    pub dcov2: f64,
    pub method: OracleMethod,
    /// Standard error of `dcor`; zero for closed forms.
    pub std_error: f64,
}

/// Solves `v·[1 + a(1 - v)] = t` for the root in `[0, 1]`. Written in
/// rationalized form so that `a = 0` reduces to `v = t` without cancellation.
pub fn fgm_conditional_inverse(a: f64, t: f64) -> f64 {
    if t <= 0.0 {
        // also avoids 0/0 at a = -1
        return 0.0;
    }
    let b = 1.0 + a;
    let disc = (b * b - 4.0 * a * t).max(0.0);
    (2.0 * t / (b + disc.sqrt())).clamp(0.0, 1.0)
}

fn ridge_weight(x: f64, y: f64, k: u32) -> f64 {
    let c = x - 0.5;
    let d = y - 4.0 * c * c;
    (1.0 - d * d).powi(k as i32)
}

/// `n` i.i.d. draws from `spec`, deterministic in `seed`.
pub fn sample_model(spec: ModelSpec, n: usize, seed: u64) -> Result<PairedSample> {
    spec.validate()?;
    if n == 0 {
        return Err(DcorError::SampleTooSmall { what: "sampling", n, min: 1 });
    }
    let mut rng = from_seed(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    match spec {
        ModelSpec::Fgm { theta } => {
            for _ in 0..n {
                let u: f64 = rng.random();
                let t: f64 = rng.random();
                xs.push(u);
                ys.push(fgm_conditional_inverse(theta * (1.0 - 2.0 * u), t));
            }
        }
        ModelSpec::Bvn { rho } => {
            let s = (1.0 - rho * rho).max(0.0).sqrt();
            for _ in 0..n {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                xs.push(z1);
                ys.push(rho * z1 + s * z2);
            }
        }
        ModelSpec::Nonlinear { k } => {
            while xs.len() < n {
                let x: f64 = rng.random();
                let y: f64 = rng.random();
                let accept: f64 = rng.random();
                if accept < ridge_weight(x, y, k) {
                    xs.push(x);
                    ys.push(y);
                }
            }
        }
    }
    PairedSample::from_columns(xs, ys)
}

fn bvn_numerator(rho: f64) -> f64 {
    rho * rho.asin() + (1.0 - rho * rho).sqrt() - rho * (rho / 2.0).asin() - (4.0 - rho * rho).sqrt() + 1.0
}

/// Default number of sample points for the numeric oracle.
pub const DEFAULT_ORACLE_BUDGET: usize = 1 << 18;
/// Seed used for cached numeric oracle values.
pub const DEFAULT_ORACLE_SEED: u64 = 0x0dc0_0e1e;

/// Ground-truth distance correlation. Numeric values are cached per `k`.
pub fn exact_dcor(spec: ModelSpec) -> Result<OracleResult> {
    spec.validate()?;
    match spec {
        ModelSpec::Nonlinear { k } => {
            static CACHE: OnceLock<Mutex<HashMap<u32, OracleResult>>> = OnceLock::new();
            let cache = CACHE.get_or_init(Default::default);
            if let Some(hit) = cache.lock().expect("oracle cache").get(&k) {
                return Ok(*hit);
            }
            let res = exact_dcor_with_budget(spec, DEFAULT_ORACLE_BUDGET, DEFAULT_ORACLE_SEED)?;
            cache.lock().expect("oracle cache").insert(k, res);
            Ok(res)
        }
        _ => exact_dcor_with_budget(spec, DEFAULT_ORACLE_BUDGET, DEFAULT_ORACLE_SEED),
    }
}

/// Like [`exact_dcor`] with an explicit Monte Carlo budget and seed for the
/// numeric family. Closed forms ignore both.
pub fn exact_dcor_with_budget(spec: ModelSpec, budget: usize, seed: u64) -> Result<OracleResult> {
    spec.validate()?;
    Ok(match spec {
        ModelSpec::Fgm { theta } => OracleResult {
            dcor: theta.abs() / 10f64.sqrt(),
            dcov2: theta * theta / 225.0,
            method: OracleMethod::ClosedForm,
            std_error: 0.0,
        },
        ModelSpec::Bvn { rho } => {
            let (dcor, num) = if rho == 0.0 {
                (0.0, 0.0)
            } else if rho.abs() == 1.0 {
                (1.0, bvn_numerator(1.0))
            } else {
                let num = bvn_numerator(rho).max(0.0);
                ((num / (1.0 + PI / 3.0 - 3f64.sqrt())).sqrt(), num)
            };
            OracleResult { dcor, dcov2: 4.0 / PI * num, method: OracleMethod::ClosedForm, std_error: 0.0 }
        }
        ModelSpec::Nonlinear { .. } => {
            let e = dependence_expectations(|m, s| sample_model(spec, m, s), budget, seed)?;
            OracleResult { dcor: e.dcor, dcov2: e.dcov2, method: OracleMethod::Numeric, std_error: e.dcor_std_error }
        }
    })
}

/// Monte Carlo estimates of the population distance covariance, both
/// distance variances and the distance correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectations {
    pub dcov2: f64,
    pub dcov2_std_error: f64,
    pub var2_x: f64,
    pub var2_y: f64,
    pub dcor: f64,
    pub dcor_std_error: f64,
    pub batches: usize,
}

/// Points per batch for univariate samplers.
const ORACLE_BATCH: usize = 4096;
/// Points per batch when a margin is multivariate (quadratic memory).
const ORACLE_BATCH_MULTI: usize = 512;
const MIN_BUDGET: usize = 10_000;

fn ratio_dcor(c: f64, vx: f64, vy: f64) -> f64 {
    let den = (vx * vy).sqrt();
    if den > 0.0 {
        (c / den).max(0.0).sqrt()
    } else {
        0.0
    }
}

/// Estimates the three pairwise-distance expectations defining the squared
/// distance covariance (and its marginal analogues) from `budget` draws of
/// `sampler(batch_size, batch_seed)`.
///
/// Draws are split into independent batches; each batch contributes unbiased
/// within-batch averages over distinct index pairs and triplets. Standard
/// errors come from the between-batch spread (delete-one-batch jackknife for
/// the correlation).
pub fn dependence_expectations<F>(sampler: F, budget: usize, seed: u64) -> Result<Expectations>
where
    F: Fn(usize, u64) -> Result<PairedSample> + Sync,
{
    if budget < MIN_BUDGET {
        return Err(DcorError::InvalidParameter(format!("budget must be at least {MIN_BUDGET}, got {budget}")));
    }
    let probe = sampler(4, derive_seed(seed, u64::MAX))?;
    let batch = if probe.is_univariate() { ORACLE_BATCH } else { ORACLE_BATCH_MULTI };
    let batches = budget.div_ceil(batch).max(2);
    let per_batch: Vec<(f64, f64, f64)> = (0..batches)
        .into_par_iter()
        .map_init(SortedWorkspace::default, |ws, b| -> Result<(f64, f64, f64)> {
            let s = sampler(batch, derive_seed(seed, b as u64))?;
            let (u, _, _) = statistics(&s, VCentering::Classic, Dispatch::always_fast(), ws)?;
            Ok((u.cov2_xy, u.var2_x, u.var2_y))
        })
        .collect::<Result<_>>()?;

    let bf = batches as f64;
    let (sc, sx, sy) = per_batch.iter().fold((0.0, 0.0, 0.0), |a, v| (a.0 + v.0, a.1 + v.1, a.2 + v.2));
    let dcov2 = sc / bf;
    let dcov2_var = per_batch.iter().map(|v| (v.0 - dcov2).powi(2)).sum::<f64>() / (bf - 1.0);
    let dcor = ratio_dcor(sc, sx, sy);
    let loo: Vec<f64> = per_batch.iter().map(|v| ratio_dcor(sc - v.0, sx - v.1, sy - v.2)).collect();
    let loo_mean = loo.iter().sum::<f64>() / bf;
    let jack_var = (bf - 1.0) / bf * loo.iter().map(|t| (t - loo_mean).powi(2)).sum::<f64>();
    Ok(Expectations {
        dcov2,
        dcov2_std_error: (dcov2_var / bf).sqrt(),
        var2_x: sx / bf,
        var2_y: sy / bf,
        dcor,
        dcor_std_error: jack_var.sqrt(),
        batches,
    })
}

/// Squared distance covariance of `sampler`'s distribution with its standard
/// error.
pub fn dcov2_expectation<F>(sampler: F, budget: usize, seed: u64) -> Result<(f64, f64)>
where
    F: Fn(usize, u64) -> Result<PairedSample> + Sync,
{
    let e = dependence_expectations(sampler, budget, seed)?;
    Ok((e.dcov2, e.dcov2_std_error))
}
