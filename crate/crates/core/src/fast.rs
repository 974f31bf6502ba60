//! O(n log n) distance covariance statistics for univariate samples.
//!
//! Every statistic here is an affine combination of four sums over the
//! distance matrices `a_ij = |x_i - x_j|`, `b_ij = |y_i - y_j|`:
//!
//! * `cross = Σ_{i,j} a_ij b_ij`
//! * `row_dot = Σ_i a_i· b_i·` (row sums `a_i·`, `b_i·`)
//! * `total_a = Σ_ij a_ij`, `total_b = Σ_ij b_ij`
//!
//! Row sums come from prefix sums over the sorted values. The cross sum walks
//! x in sorted order and keeps the already visited points in a Fenwick tree
//! keyed by y-rank with four channels (`1, y, x, xy`), so that
//! `Σ_{j visited} |x_i - x_j| |y_i - y_j|` expands into four signed partial
//! sums. Points tied in x are queried before any of them is inserted, so they
//! contribute exactly zero to each other.

use serde::{Deserialize, Serialize};

use crate::distance::{naive_both_stats, naive_u_stats, naive_v_stats, DcorEstimate, NegativePolicy, SquaredStats, VCentering};
use crate::error::{DcorError, Result};
use crate::sample::PairedSample;

/// Sample size from which [`dcor_auto`] switches to the sorting path.
pub const DEFAULT_FAST_THRESHOLD: usize = 256;

/// Reusable buffers for the sorting algorithm. One workspace serves one call at
/// a time; use a workspace per thread for parallel work.
#[derive(Debug, Default, Clone)]
pub struct SortedWorkspace {
    order_x: Vec<usize>,
    order_y: Vec<usize>,
    rank_y: Vec<usize>,
    xc: Vec<f64>,
    yc: Vec<f64>,
    row_x: Vec<f64>,
    row_y: Vec<f64>,
    prefix: Vec<f64>,
    tree: Vec<[f64; 4]>,
}

impl SortedWorkspace {
    pub fn new(n: usize) -> Self {
        let mut ws = Self::default();
        ws.resize(n);
        ws
    }

    fn resize(&mut self, n: usize) {
        self.order_x.resize(n, 0);
        self.order_y.resize(n, 0);
        self.rank_y.resize(n, 0);
        self.xc.resize(n, 0.0);
        self.yc.resize(n, 0.0);
        self.row_x.resize(n, 0.0);
        self.row_y.resize(n, 0.0);
        self.prefix.resize(n + 1, 0.0);
        self.tree.resize(n + 1, [0.0; 4]);
    }

    /// Order arrays from the most recent call (permutations of `0..n`).
    pub fn orders(&self) -> (&[usize], &[usize]) {
        (&self.order_x, &self.order_y)
    }
}

/// The four distance sums of a univariate pair, plus their self-pair
/// counterparts for each margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSums {
    pub n: usize,
    pub cross: f64,
    pub row_dot: f64,
    pub total_x: f64,
    pub total_y: f64,
    pub self_x: f64,
    pub row_dot_x: f64,
    pub self_y: f64,
    pub row_dot_y: f64,
}

struct Terms {
    cross: f64,
    row_dot: f64,
    total_a: f64,
    total_b: f64,
}

impl Terms {
    fn ucov2(&self, n: f64) -> f64 {
        (self.cross - 2.0 * self.row_dot / (n - 2.0) + self.total_a * self.total_b / ((n - 1.0) * (n - 2.0)))
            / (n * (n - 3.0))
    }

    fn dcov2_v(&self, n: f64, mode: VCentering) -> f64 {
        let classic = (self.cross - 2.0 * self.row_dot / n + self.total_a * self.total_b / (n * n)) / (n * n);
        match mode {
            VCentering::Classic => classic,
            // diagonal of the classical matrix: A_kk = -2 r_k / n + g / n²
            VCentering::ZeroDiagonal => {
                let diag = 4.0 * self.row_dot / (n * n) - 3.0 * self.total_a * self.total_b / (n * n * n);
                classic - diag / (n * n)
            }
        }
    }
}

impl DistanceSums {
    fn terms(&self) -> [Terms; 3] {
        [
            Terms { cross: self.cross, row_dot: self.row_dot, total_a: self.total_x, total_b: self.total_y },
            Terms { cross: self.self_x, row_dot: self.row_dot_x, total_a: self.total_x, total_b: self.total_x },
            Terms { cross: self.self_y, row_dot: self.row_dot_y, total_a: self.total_y, total_b: self.total_y },
        ]
    }

    /// U-statistic ingredients; requires `n >= 4`.
    pub fn u_stats(&self) -> Result<SquaredStats> {
        if self.n < 4 {
            return Err(DcorError::SampleTooSmall { what: "the U-statistic estimator", n: self.n, min: 4 });
        }
        let n = self.n as f64;
        let [c, x, y] = self.terms();
        Ok(SquaredStats { cov2_xy: c.ucov2(n), var2_x: x.ucov2(n), var2_y: y.ucov2(n) })
    }

    pub fn v_stats(&self, mode: VCentering) -> SquaredStats {
        let n = self.n as f64;
        let [c, x, y] = self.terms();
        SquaredStats { cov2_xy: c.dcov2_v(n, mode), var2_x: x.dcov2_v(n, mode), var2_y: y.dcov2_v(n, mode) }
    }
}

fn check_inputs(x: &[f64], y: &[f64], min: usize, what: &'static str) -> Result<()> {
    if x.len() != y.len() {
        return Err(DcorError::RowMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < min {
        return Err(DcorError::SampleTooSmall { what, n: x.len(), min });
    }
    for (side, v) in [("x", x), ("y", y)] {
        if let Some(row) = v.iter().position(|t| !t.is_finite()) {
            return Err(DcorError::NonFinite { side, row, col: 0 });
        }
    }
    Ok(())
}

/// Sorts `order` by `values` (stable, total order) and writes shifted values
/// `values - median` into `shifted`; the shift keeps a constant column exactly zero.
fn sort_and_shift(values: &[f64], order: &mut [usize], shifted: &mut [f64]) {
    for (i, o) in order.iter_mut().enumerate() {
        *o = i;
    }
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mid = values[order[order.len() / 2]];
    for (s, v) in shifted.iter_mut().zip(values) {
        *s = v - mid;
    }
}

/// Row sums `Σ_j |v_i - v_j|` from prefix sums over the sorted values.
/// Returns the grand total.
fn row_sums(values: &[f64], order: &[usize], prefix: &mut [f64], rows: &mut [f64]) -> f64 {
    let n = order.len();
    prefix[0] = 0.0;
    for (r, &i) in order.iter().enumerate() {
        prefix[r + 1] = prefix[r] + values[i];
    }
    let total = prefix[n];
    let mut grand = 0.0;
    for (r, &i) in order.iter().enumerate() {
        let v = values[i];
        let below = v * r as f64 - prefix[r];
        let above = (total - prefix[r + 1]) - v * (n - r - 1) as f64;
        rows[i] = below + above;
        grand += rows[i];
    }
    grand
}

/// `Σ_{i,j} (v_i - v_j)²` in closed form, on already shifted values.
fn self_cross(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    2.0 * n * values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
}

fn fenwick_add(tree: &mut [[f64; 4]], mut pos: usize, w: [f64; 4]) {
    while pos < tree.len() {
        for c in 0..4 {
            tree[pos][c] += w[c];
        }
        pos += pos & pos.wrapping_neg();
    }
}

fn fenwick_prefix(tree: &[[f64; 4]], mut pos: usize) -> [f64; 4] {
    let mut acc = [0.0; 4];
    while pos > 0 {
        for c in 0..4 {
            acc[c] += tree[pos][c];
        }
        pos -= pos & pos.wrapping_neg();
    }
    acc
}

/// `Σ_{i,j} |x_i - x_j| |y_i - y_j|` in O(n log n). Expects `ws.xc`, `ws.yc`,
/// `ws.order_x`, `ws.order_y` to be filled.
fn cross_sum(ws: &mut SortedWorkspace) -> f64 {
    let n = ws.xc.len();
    // dense y ranks, 1-based, ties share a rank
    let mut rank = 0usize;
    let mut prev = f64::NAN;
    for &i in &ws.order_y {
        let v = ws.yc[i];
        if v != prev {
            rank += 1;
            prev = v;
        }
        ws.rank_y[i] = rank;
    }
    let tree = &mut ws.tree[..=rank];
    tree.fill([0.0; 4]);
    let mut inserted = [0.0f64; 4];
    let mut half = 0.0;
    let mut start = 0;
    while start < n {
        let xv = ws.xc[ws.order_x[start]];
        let mut end = start + 1;
        while end < n && ws.xc[ws.order_x[end]] == xv {
            end += 1;
        }
        for &i in &ws.order_x[start..end] {
            let (xi, yi, r) = (ws.xc[i], ws.yc[i], ws.rank_y[i]);
            let below = fenwick_prefix(tree, r - 1);
            let upto = fenwick_prefix(tree, r);
            let mut s = [0.0; 4];
            for c in 0..4 {
                // (y_j < y_i) minus (y_j > y_i)
                s[c] = below[c] - (inserted[c] - upto[c]);
            }
            half += xi * yi * s[0] - xi * s[1] - yi * s[2] + s[3];
        }
        for &i in &ws.order_x[start..end] {
            let (xi, yi) = (ws.xc[i], ws.yc[i]);
            let w = [1.0, yi, xi, xi * yi];
            fenwick_add(tree, ws.rank_y[i], w);
            for c in 0..4 {
                inserted[c] += w[c];
            }
        }
        start = end;
    }
    2.0 * half
}

/// All distance sums of a univariate pair in O(n log n) time and O(n) memory.
pub fn distance_sums_1d(x: &[f64], y: &[f64], ws: &mut SortedWorkspace) -> Result<DistanceSums> {
    check_inputs(x, y, 1, "distance sums")?;
    let n = x.len();
    ws.resize(n);
    sort_and_shift(x, &mut ws.order_x, &mut ws.xc);
    sort_and_shift(y, &mut ws.order_y, &mut ws.yc);
    let total_x = row_sums(&ws.xc, &ws.order_x, &mut ws.prefix, &mut ws.row_x);
    let total_y = row_sums(&ws.yc, &ws.order_y, &mut ws.prefix, &mut ws.row_y);
    let self_x = self_cross(&ws.xc);
    let self_y = self_cross(&ws.yc);
    let row_dot_x = ws.row_x.iter().map(|r| r * r).sum();
    let row_dot_y = ws.row_y.iter().map(|r| r * r).sum();
    let (cross, row_dot) = if x == y {
        (self_x, row_dot_x)
    } else {
        let row_dot = ws.row_x.iter().zip(&ws.row_y).map(|(a, b)| a * b).sum();
        (cross_sum(ws), row_dot)
    };
    Ok(DistanceSums { n, cross, row_dot, total_x, total_y, self_x, row_dot_x, self_y, row_dot_y })
}

/// Unbiased squared distance covariance of two univariate samples, O(n log n).
pub fn fast_ucov2_1d(x: &[f64], y: &[f64], ws: &mut SortedWorkspace) -> Result<f64> {
    check_inputs(x, y, 4, "the U-statistic estimator")?;
    Ok(distance_sums_1d(x, y, ws)?.u_stats()?.cov2_xy)
}

/// Classical V-statistic squared distance covariance, O(n log n).
pub fn fast_dcov2_v_1d(x: &[f64], y: &[f64], ws: &mut SortedWorkspace) -> Result<f64> {
    fast_dcov2_v_1d_mode(x, y, VCentering::Classic, ws)
}

/// V-statistic with either diagonal convention; the zero-diagonal form is the
/// classical value minus the diagonal contribution `Σ_k A_kk B_kk / n²`.
pub fn fast_dcov2_v_1d_mode(x: &[f64], y: &[f64], mode: VCentering, ws: &mut SortedWorkspace) -> Result<f64> {
    check_inputs(x, y, 2, "the V-statistic estimator")?;
    Ok(distance_sums_1d(x, y, ws)?.v_stats(mode).cov2_xy)
}

/// Which implementation produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Path {
    Naive,
    Fast,
}

/// Routing rule between the quadratic and the sorting implementation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dispatch {
    /// Smallest `n` sent to the sorting path (univariate samples only).
    pub fast_threshold: usize,
}

impl Default for Dispatch {
    fn default() -> Self {
        Self { fast_threshold: DEFAULT_FAST_THRESHOLD }
    }
}

impl Dispatch {
    pub fn force_naive() -> Self {
        Self { fast_threshold: usize::MAX }
    }

    pub fn always_fast() -> Self {
        Self { fast_threshold: 0 }
    }

    pub fn path_for(&self, s: &PairedSample) -> Path {
        if s.is_univariate() && s.n() >= self.fast_threshold {
            Path::Fast
        } else {
            Path::Naive
        }
    }
}

/// Estimator selector shared by the dispatcher and the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointEstimator {
    V(VCentering),
    U(NegativePolicy),
}

fn columns(s: &PairedSample) -> (Vec<f64>, Vec<f64>) {
    let x = s.x_column().expect("univariate x").to_vec();
    let y = s.y_column().expect("univariate y").to_vec();
    (x, y)
}

/// Both U- and V-statistic ingredients for `s`, using the routed path.
/// `n >= 4` is required since the U ingredients are always produced.
pub fn statistics(s: &PairedSample, mode: VCentering, dispatch: Dispatch, ws: &mut SortedWorkspace) -> Result<(SquaredStats, SquaredStats, Path)> {
    match dispatch.path_for(s) {
        Path::Fast => {
            s.require("the U-statistic estimator", 4)?;
            let (x, y) = columns(s);
            let sums = distance_sums_1d(&x, &y, ws)?;
            Ok((sums.u_stats()?, sums.v_stats(mode), Path::Fast))
        }
        Path::Naive => {
            let (u, v) = naive_both_stats(s, mode)?;
            Ok((u, v, Path::Naive))
        }
    }
}

/// Point estimate routed through the fast path when `p = q = 1` and
/// `n >= dispatch.fast_threshold`, otherwise through the direct path.
pub fn dcor_auto(s: &PairedSample, estimator: PointEstimator, dispatch: Dispatch) -> Result<(DcorEstimate, Path)> {
    let path = dispatch.path_for(s);
    let est = match (path, estimator) {
        (Path::Fast, PointEstimator::V(mode)) => {
            s.require("the V-statistic estimator", 2)?;
            let (x, y) = columns(s);
            let mut ws = SortedWorkspace::new(s.n());
            distance_sums_1d(&x, &y, &mut ws)?.v_stats(mode).v_estimate()?
        }
        (Path::Fast, PointEstimator::U(policy)) => {
            s.require("the U-statistic estimator", 4)?;
            let (x, y) = columns(s);
            let mut ws = SortedWorkspace::new(s.n());
            distance_sums_1d(&x, &y, &mut ws)?.u_stats()?.u_estimate(policy)?
        }
        (Path::Naive, PointEstimator::V(mode)) => naive_v_stats(s, mode)?.v_estimate()?,
        (Path::Naive, PointEstimator::U(policy)) => naive_u_stats(s)?.u_estimate(policy)?,
    };
    Ok((est, path))
}
