//! Convex combination `λ·dCorU + (1 - λ)·dCorV` with an MSE-optimal weight.
//!
//! The optimal weight depends on the variances, biases and covariance of the
//! two estimators. In practice they are estimated with a smoothed bootstrap:
//! resample pairs with replacement, jitter each coordinate with Gaussian
//! kernel noise scaled by a bandwidth, and recompute both estimators on every
//! resample. Biases are measured against dCorV of the original sample.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{DcorEstimate, NegativePolicy, SquaredStats, VCentering, Variant};
use crate::error::{DcorError, Result};
use crate::fast::{statistics, Dispatch, SortedWorkspace};
use crate::rng::stream;
use crate::sample::PairedSample;

/// Denominator below which both estimators are treated as interchangeable.
pub const LAMBDA_DENOM_EPS: f64 = 1e-12;

/// Grid of bandwidths used for the reproduction experiments.
pub const DEFAULT_BANDWIDTH_GRID: [f64; 8] = [0.0025, 0.005, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32];

/// Raw second-order moments of the pair (dCorU, dCorV).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub var_u: f64,
    pub var_v: f64,
    pub bias_u: f64,
    pub bias_v: f64,
    pub cov_uv: f64,
}

impl Moments {
    fn denominator(&self) -> f64 {
        let d = self.bias_u - self.bias_v;
        self.var_u + self.var_v - 2.0 * self.cov_uv + d * d
    }

    fn numerator(&self) -> f64 {
        -self.cov_uv + self.var_v + self.bias_v * (self.bias_v - self.bias_u)
    }

    /// Stationary point of [`Moments::mse_at`], or `None` when the denominator
    /// is below [`LAMBDA_DENOM_EPS`].
    pub fn lambda_unclamped(&self) -> Option<f64> {
        let den = self.denominator();
        (den >= LAMBDA_DENOM_EPS).then(|| self.numerator() / den)
    }

    /// MSE of the combination with weight `lambda`.
    pub fn mse_at(&self, lambda: f64) -> f64 {
        let mu = 1.0 - lambda;
        let bias = lambda * self.bias_u + mu * self.bias_v;
        lambda * lambda * self.var_u + mu * mu * self.var_v + 2.0 * lambda * mu * self.cov_uv + bias * bias
    }
}

/// MSE-optimal weight, clamped to `[0, 1]`; 0.5 when the estimators are
/// indistinguishable.
pub fn lambda_opt(m: &Moments) -> Result<f64> {
    if !(m.var_u >= 0.0 && m.var_v >= 0.0) {
        return Err(DcorError::InvalidParameter(format!(
            "variances must be nonnegative, got var_u = {}, var_v = {}",
            m.var_u, m.var_v
        )));
    }
    Ok(m.lambda_unclamped().map_or(0.5, |l| l.clamp(0.0, 1.0)))
}

/// Moments of paired draws `(u_b, v_b)` around a reference value. `ddof` is
/// the variance/covariance denominator offset (1 for sample moments).
pub fn moments_from_draws(u: &[f64], v: &[f64], reference: f64, ddof: usize) -> Moments {
    assert_eq!(u.len(), v.len(), "paired draws");
    assert!(u.len() > ddof, "need more draws than ddof");
    let n = u.len() as f64;
    let mean_u = u.iter().sum::<f64>() / n;
    let mean_v = v.iter().sum::<f64>() / n;
    let (mut suu, mut svv, mut suv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (du, dv) = (a - mean_u, b - mean_v);
        suu += du * du;
        svv += dv * dv;
        suv += du * dv;
    }
    let den = n - ddof as f64;
    Moments {
        var_u: suu / den,
        var_v: svv / den,
        bias_u: mean_u - reference,
        bias_v: mean_v - reference,
        cov_uv: suv / den,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSource {
    Bootstrap,
    MonteCarloOracle,
}

/// Estimated moments together with the resulting optimal weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub var_u: f64,
    pub var_v: f64,
    pub bias_u: f64,
    pub bias_v: f64,
    pub cov_uv: f64,
    pub lambda0: f64,
    pub source: MomentSource,
    /// Bandwidths `(h1, h2)` used by the bootstrap; `None` for oracle moments.
    pub bandwidth: Option<(f64, f64)>,
}

impl MomentSummary {
    pub fn from_moments(m: Moments, source: MomentSource, bandwidth: Option<(f64, f64)>) -> Result<Self> {
        Ok(Self {
            var_u: m.var_u,
            var_v: m.var_v,
            bias_u: m.bias_u,
            bias_v: m.bias_v,
            cov_uv: m.cov_uv,
            lambda0: lambda_opt(&m)?,
            source,
            bandwidth,
        })
    }

    pub fn moments(&self) -> Moments {
        Moments {
            var_u: self.var_u,
            var_v: self.var_v,
            bias_u: self.bias_u,
            bias_v: self.bias_v,
            cov_uv: self.cov_uv,
        }
    }

    /// MSE of the combination at this summary's own weight.
    pub fn mse_at_lambda0(&self) -> f64 {
        self.moments().mse_at(self.lambda0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// Silverman's rule per margin.
    #[default]
    Silverman,
    Fixed { h1: f64, h2: f64 },
    /// `h1 = h2` swept over the grid.
    Grid(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub kernel: Kernel,
    pub bandwidth: BandwidthRule,
    pub policy: NegativePolicy,
    pub seed: u64,
    pub v_centering: VCentering,
    pub dispatch: Dispatch,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replications: 1000,
            kernel: Kernel::Gaussian,
            bandwidth: BandwidthRule::Silverman,
            policy: NegativePolicy::Signed,
            seed: 0,
            v_centering: VCentering::Classic,
            dispatch: Dispatch::default(),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(DcorError::InvalidParameter(format!(
                "bootstrap needs at least 2 replications, got {}",
                self.replications
            )));
        }
        match &self.bandwidth {
            BandwidthRule::Silverman => {}
            BandwidthRule::Fixed { h1, h2 } => {
                if !(*h1 > 0.0 && *h2 > 0.0 && h1.is_finite() && h2.is_finite()) {
                    return Err(DcorError::InvalidParameter(format!("bandwidths must be positive, got ({h1}, {h2})")));
                }
            }
            BandwidthRule::Grid(grid) => {
                if grid.is_empty() {
                    return Err(DcorError::InvalidParameter("empty bandwidth grid".into()));
                }
                if grid.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
                    return Err(DcorError::InvalidParameter("grid bandwidths must be positive".into()));
                }
                if grid.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(DcorError::InvalidParameter("bandwidth grid must be strictly increasing".into()));
                }
            }
        }
        Ok(())
    }

    /// Bandwidth pairs this configuration evaluates for `s`.
    pub fn bandwidths_for(&self, s: &PairedSample) -> Vec<(f64, f64)> {
        match &self.bandwidth {
            BandwidthRule::Silverman => {
                let hx = silverman_bandwidth(s.xs().as_slice().expect("standard layout"));
                let hy = silverman_bandwidth(s.ys().as_slice().expect("standard layout"));
                vec![(hx, hy)]
            }
            BandwidthRule::Fixed { h1, h2 } => vec![(*h1, *h2)],
            BandwidthRule::Grid(grid) => grid.iter().map(|&h| (h, h)).collect(),
        }
    }
}

fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let pos = prob * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule of thumb for a Gaussian kernel,
/// `0.9 · min(sd, IQR / 1.34) · n^(-1/5)`.
///
/// Falls back to `sd` when the IQR is zero, and to `1e-6 · (1 + |mean|)` for a
/// constant input.
pub fn silverman_bandwidth(v: &[f64]) -> f64 {
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n.max(1) as f64;
    let floor = 1e-6 * (1.0 + mean.abs());
    if n < 2 {
        return floor;
    }
    let sd = (v.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let mut spread = sd.min(iqr / 1.34);
    if spread <= 0.0 {
        spread = sd;
    }
    if spread <= 0.0 {
        return floor;
    }
    0.9 * spread * (n as f64).powf(-0.2)
}

/// Bootstrap draws of (dCorU, dCorV) for each bandwidth pair, indexed
/// `[bandwidth][replication]`. Every bandwidth sees the same resample indices
/// and the same standardized kernel noise.
pub fn bootstrap_draws(s: &PairedSample, cfg: &BootstrapConfig, bandwidths: &[(f64, f64)]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    cfg.validate()?;
    s.require("the smoothed bootstrap", 4)?;
    let (n, p, q) = (s.n(), s.p(), s.q());
    let xs = s.xs();
    let ys = s.ys();
    let per_rep: Vec<Vec<(f64, f64)>> = (0..cfg.replications)
        .into_par_iter()
        .map_init(SortedWorkspace::default, |ws, b| -> Result<Vec<(f64, f64)>> {
            let mut rng = stream(cfg.seed, b as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let wx: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
            let wy: Vec<f64> = (0..n * q).map(|_| rng.sample(StandardNormal)).collect();
            let mut out = Vec::with_capacity(bandwidths.len());
            for &(h1, h2) in bandwidths {
                let bx = ndarray::Array2::from_shape_fn((n, p), |(i, c)| xs[[idx[i], c]] + h1 * wx[i * p + c]);
                let by = ndarray::Array2::from_shape_fn((n, q), |(i, c)| ys[[idx[i], c]] + h2 * wy[i * q + c]);
                let resample = PairedSample::new(bx, by)?;
                let (u, v, _) = statistics(&resample, cfg.v_centering, cfg.dispatch, ws)?;
                out.push((u.u_estimate(cfg.policy)?.value, v.v_estimate()?.value));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok((0..bandwidths.len())
        .map(|h| per_rep.iter().map(|r| r[h]).unzip())
        .collect())
}

/// Bootstrap moment summaries for every bandwidth pair, on shared draws.
pub fn bootstrap_sweep(s: &PairedSample, cfg: &BootstrapConfig, bandwidths: &[(f64, f64)]) -> Result<Vec<MomentSummary>> {
    let mut ws = SortedWorkspace::default();
    let (_, v, _) = statistics(s, cfg.v_centering, cfg.dispatch, &mut ws)?;
    let theta_hat = v.v_estimate()?.value;
    bootstrap_draws(s, cfg, bandwidths)?
        .into_iter()
        .zip(bandwidths)
        .map(|((u, v), &h)| MomentSummary::from_moments(moments_from_draws(&u, &v, theta_hat, 1), MomentSource::Bootstrap, Some(h)))
        .collect()
}

/// Smoothed-bootstrap estimate of the moments and of the optimal weight.
///
/// With a bandwidth grid, the grid value whose bootstrap-estimated MSE of the
/// combination (at its own weight) is smallest is returned.
pub fn smoothed_bootstrap_moments(s: &PairedSample, cfg: &BootstrapConfig) -> Result<MomentSummary> {
    cfg.validate()?;
    let bandwidths = cfg.bandwidths_for(s);
    let sweep = bootstrap_sweep(s, cfg, &bandwidths)?;
    Ok(sweep
        .into_iter()
        .min_by(|a, b| a.mse_at_lambda0().total_cmp(&b.mse_at_lambda0()))
        .expect("at least one bandwidth"))
}

/// Combined estimate with its components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComboEstimate {
    pub estimate: DcorEstimate,
    pub moments: MomentSummary,
    pub u: DcorEstimate,
    pub v: DcorEstimate,
}

fn combined(u: &DcorEstimate, v: &DcorEstimate, u_stats: &SquaredStats, policy: NegativePolicy, lambda: f64) -> DcorEstimate {
    let value = if lambda == 1.0 {
        u.value
    } else if lambda == 0.0 {
        v.value
    } else {
        lambda * u.value + (1.0 - lambda) * v.value
    };
    DcorEstimate {
        value,
        variant: Variant::Combo(policy),
        cov2_xy: u_stats.cov2_xy,
        var2_x: u_stats.var2_x,
        var2_y: u_stats.var2_y,
        was_negative: u_stats.cov2_xy < 0.0,
        degenerate: u.degenerate || v.degenerate,
    }
}

/// `λ·dCorU_policy + (1 - λ)·dCorV` on `s` for a given weight.
pub fn combine_with_lambda(s: &PairedSample, policy: NegativePolicy, lambda: f64, mode: VCentering, dispatch: Dispatch) -> Result<DcorEstimate> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(DcorError::InvalidParameter(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let mut ws = SortedWorkspace::default();
    let (us, vs, _) = statistics(s, mode, dispatch, &mut ws)?;
    Ok(combined(&us.u_estimate(policy)?, &vs.v_estimate()?, &us, policy, lambda))
}

/// Convex-combination estimate with a bootstrap-estimated weight. Point
/// estimates use the original sample.
pub fn dcor_combo(s: &PairedSample, cfg: &BootstrapConfig) -> Result<ComboEstimate> {
    let moments = smoothed_bootstrap_moments(s, cfg)?;
    let mut ws = SortedWorkspace::default();
    let (us, vs, _) = statistics(s, cfg.v_centering, cfg.dispatch, &mut ws)?;
    let u = us.u_estimate(cfg.policy)?;
    let v = vs.v_estimate()?;
    Ok(ComboEstimate {
        estimate: combined(&u, &v, &us, cfg.policy, moments.lambda0),
        moments,
        u,
        v,
    })
}
