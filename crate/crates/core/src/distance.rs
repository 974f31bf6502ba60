//! Euclidean distance matrices, V- and U-centering, and the direct (quadratic)
//! distance covariance and correlation estimators.
//!
//! Two centerings of a distance matrix `a` are provided:
//!
//! * V-centering subtracts row and column means and adds back the grand mean.
//!   [`VCentering::Classic`] applies that formula on the diagonal as well;
//!   [`VCentering::ZeroDiagonal`] forces the diagonal to zero.
//! * U-centering uses the denominators `n - 2` and `(n - 1)(n - 2)` and a zero
//!   diagonal, which makes every row and column sum vanish and turns the inner
//!   product `Σ_{k≠l} Ã_kl B̃_kl / (n(n - 3))` into an unbiased estimator of the
//!   squared distance covariance.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{DcorError, Result};
use crate::sample::{check_finite, PairedSample};

/// Correlations above `1 + CLAMP_TOL` indicate a numerical bug rather than rounding.
pub const CLAMP_TOL: f64 = 1e-6;

/// Diagonal convention for V-centering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VCentering {
    /// Centering formula applied on the diagonal too (the classical V-statistic).
    #[default]
    Classic,
    /// Diagonal set to zero.
    ZeroDiagonal,
}

impl VCentering {
    pub fn name(self) -> &'static str {
        match self {
            VCentering::Classic => "classic",
            VCentering::ZeroDiagonal => "zero_diagonal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Centering {
    V(VCentering),
    U,
}

impl Centering {
    fn name(self) -> &'static str {
        match self {
            Centering::V(VCentering::Classic) => "V (classic)",
            Centering::V(VCentering::ZeroDiagonal) => "V (zero diagonal)",
            Centering::U => "U",
        }
    }
}

/// How a negative squared U-statistic correlation is turned into a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativePolicy {
    /// `sign(r²)·sqrt(|r²|)`.
    #[default]
    Signed,
    /// `sqrt(|r²|)`.
    Abs,
    /// `sqrt(max(r², 0))`.
    Trunc,
}

impl NegativePolicy {
    pub const ALL: [NegativePolicy; 3] = [Self::Signed, Self::Abs, Self::Trunc];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    V,
    USigned,
    UAbs,
    UTrunc,
    Combo(NegativePolicy),
}

impl Variant {
    pub fn for_policy(policy: NegativePolicy) -> Self {
        match policy {
            NegativePolicy::Signed => Variant::USigned,
            NegativePolicy::Abs => Variant::UAbs,
            NegativePolicy::Trunc => Variant::UTrunc,
        }
    }
}

/// Symmetric, zero-diagonal, nonnegative matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    d: Array2<f64>,
}

impl DistanceMatrix {
    /// Wraps an arbitrary matrix after checking the distance-matrix invariants.
    pub fn from_matrix(d: Array2<f64>) -> Result<Self> {
        let n = d.nrows();
        if d.ncols() != n {
            return Err(DcorError::SizeMismatch(n, d.ncols()));
        }
        check_finite("distance matrix", d.view())?;
        for k in 0..n {
            if d[[k, k]] != 0.0 {
                return Err(DcorError::InvalidParameter(format!(
                    "distance matrix diagonal entry {k} is {}",
                    d[[k, k]]
                )));
            }
            for l in 0..k {
                if d[[k, l]] != d[[l, k]] || d[[k, l]] < 0.0 {
                    return Err(DcorError::InvalidParameter(format!(
                        "distance matrix entry ({k}, {l}) is not symmetric and nonnegative"
                    )));
                }
            }
        }
        Ok(Self { d })
    }

    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.d.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.d
    }

    /// V-centers in place, reusing the allocation.
    pub fn into_v_centered(self, mode: VCentering) -> CenteredMatrix {
        let n = self.n() as f64;
        let mut m = self.d;
        center_in_place(&mut m, 1.0 / n, 1.0 / (n * n), mode == VCentering::ZeroDiagonal);
        CenteredMatrix {
            m,
            kind: Centering::V(mode),
        }
    }

    /// U-centers in place; requires `n >= 4`.
    pub fn into_u_centered(self) -> Result<CenteredMatrix> {
        let n = self.n();
        if n < 4 {
            return Err(DcorError::SampleTooSmall {
                what: "U-centering",
                n,
                min: 4,
            });
        }
        let nf = n as f64;
        let mut m = self.d;
        center_in_place(
            &mut m,
            1.0 / (nf - 2.0),
            1.0 / ((nf - 1.0) * (nf - 2.0)),
            true,
        );
        Ok(CenteredMatrix {
            m,
            kind: Centering::U,
        })
    }
}

/// `m_kl <- a_kl - row_coef (r_k + r_l) + grand_coef · g`, where `r` holds row
/// sums and `g` the grand sum (the matrix is symmetric, so row and column sums coincide).
fn center_in_place(m: &mut Array2<f64>, row_coef: f64, grand_coef: f64, zero_diag: bool) {
    let rows = m.sum_axis(Axis(1));
    let grand: f64 = rows.sum();
    let shift = grand_coef * grand;
    Zip::indexed(m.view_mut()).for_each(|(k, l), v| {
        *v = *v - row_coef * (rows[k] + rows[l]) + shift;
    });
    if zero_diag {
        m.diag_mut().fill(0.0);
    }
}

/// A distance matrix after V- or U-centering.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMatrix {
    m: Array2<f64>,
    kind: Centering,
}

impl CenteredMatrix {
    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn kind(&self) -> Centering {
        self.kind
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.m.view()
    }

    fn dot(&self, other: &CenteredMatrix) -> f64 {
        Zip::from(&self.m)
            .and(&other.m)
            .fold(0.0, |acc, &a, &b| acc + a * b)
    }
}

/// Euclidean distances between the rows of `points`.
pub fn pairwise_distances(points: ArrayView2<'_, f64>) -> Result<DistanceMatrix> {
    let n = points.nrows();
    if n == 0 {
        return Err(DcorError::SampleTooSmall {
            what: "pairwise distances",
            n,
            min: 1,
        });
    }
    check_finite("points", points)?;
    let mut d = Array2::<f64>::zeros((n, n));
    if points.ncols() == 1 {
        let col = points.column(0);
        for k in 0..n {
            for l in 0..k {
                let v = (col[k] - col[l]).abs();
                d[[k, l]] = v;
                d[[l, k]] = v;
            }
        }
    } else {
        for k in 0..n {
            let rk = points.row(k);
            for l in 0..k {
                let v = Zip::from(&rk)
                    .and(&points.row(l))
                    .fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b))
                    .sqrt();
                d[[k, l]] = v;
                d[[l, k]] = v;
            }
        }
    }
    Ok(DistanceMatrix { d })
}

pub fn v_center(dm: &DistanceMatrix, mode: VCentering) -> CenteredMatrix {
    dm.clone().into_v_centered(mode)
}

pub fn u_center(dm: &DistanceMatrix) -> Result<CenteredMatrix> {
    dm.clone().into_u_centered()
}

fn check_pair(a: &CenteredMatrix, b: &CenteredMatrix) -> Result<()> {
    if a.n() != b.n() {
        return Err(DcorError::SizeMismatch(a.n(), b.n()));
    }
    if a.kind != b.kind {
        return Err(DcorError::CenteringMismatch {
            expected: a.kind.name(),
            got: b.kind.name(),
        });
    }
    Ok(())
}

/// V-statistic squared distance covariance `(1/n²) Σ_{k,l} A_kl B_kl`.
pub fn dcov2_v(a: &CenteredMatrix, b: &CenteredMatrix) -> Result<f64> {
    check_pair(a, b)?;
    if a.kind == Centering::U {
        return Err(DcorError::CenteringMismatch {
            expected: "V",
            got: "U",
        });
    }
    let n = a.n() as f64;
    Ok(a.dot(b) / (n * n))
}

/// Unbiased squared distance covariance `(1/(n(n-3))) Σ_{k≠l} Ã_kl B̃_kl`.
/// May be negative.
pub fn ucov2(a: &CenteredMatrix, b: &CenteredMatrix) -> Result<f64> {
    check_pair(a, b)?;
    if a.kind != Centering::U {
        return Err(DcorError::CenteringMismatch {
            expected: "U",
            got: a.kind.name(),
        });
    }
    let n = a.n() as f64;
    // diagonals are zero, so the full sum is the off-diagonal sum
    Ok(a.dot(b) / (n * (n - 3.0)))
}

/// Squared covariance and the two squared distance variances that enter a
/// distance correlation, from whichever centering produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquaredStats {
    pub cov2_xy: f64,
    pub var2_x: f64,
    pub var2_y: f64,
}

/// Point estimate of distance correlation together with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcorEstimate {
    pub value: f64,
    pub variant: Variant,
    pub cov2_xy: f64,
    pub var2_x: f64,
    pub var2_y: f64,
    pub was_negative: bool,
    /// The variance product was not positive; the value is 0 by convention.
    pub degenerate: bool,
}

fn clamp_unit(value: f64, lo: f64) -> Result<f64> {
    if value.is_nan() || value > 1.0 + CLAMP_TOL || value < lo - CLAMP_TOL {
        return Err(DcorError::Inconsistent(value));
    }
    Ok(value.clamp(lo, 1.0))
}

impl SquaredStats {
    /// `r² = cov / sqrt(var_x var_y)` when the product is positive, else 0.
    pub fn ratio(&self) -> (f64, bool) {
        let prod = self.var2_x * self.var2_y;
        if prod > 0.0 {
            (self.cov2_xy / prod.sqrt(), false)
        } else {
            (0.0, true)
        }
    }

    fn estimate(&self, variant: Variant, value: f64, degenerate: bool) -> DcorEstimate {
        DcorEstimate {
            value,
            variant,
            cov2_xy: self.cov2_xy,
            var2_x: self.var2_x,
            var2_y: self.var2_y,
            was_negative: self.cov2_xy < 0.0,
            degenerate,
        }
    }

    /// V-statistic correlation. A negative numerator (reachable only with the
    /// zero-diagonal centering) is truncated to 0.
    pub fn v_estimate(&self) -> Result<DcorEstimate> {
        let (r2, degenerate) = self.ratio();
        let value = clamp_unit(r2.max(0.0).sqrt(), 0.0)?;
        Ok(self.estimate(Variant::V, value, degenerate))
    }

    pub fn u_estimate(&self, policy: NegativePolicy) -> Result<DcorEstimate> {
        let (r2, degenerate) = self.ratio();
        let value = match policy {
            NegativePolicy::Signed => clamp_unit(r2.signum() * r2.abs().sqrt(), -1.0)?,
            NegativePolicy::Abs => clamp_unit(r2.abs().sqrt(), 0.0)?,
            NegativePolicy::Trunc => clamp_unit(r2.max(0.0).sqrt(), 0.0)?,
        };
        // signum(0.0) is 1, keep an exact zero for the zero branch
        let value = if r2 == 0.0 { 0.0 } else { value };
        Ok(self.estimate(Variant::for_policy(policy), value, degenerate))
    }
}

fn stats_from(a: &CenteredMatrix, b: &CenteredMatrix, cov: fn(&CenteredMatrix, &CenteredMatrix) -> Result<f64>) -> Result<SquaredStats> {
    Ok(SquaredStats {
        cov2_xy: cov(a, b)?,
        var2_x: cov(a, a)?,
        var2_y: cov(b, b)?,
    })
}

/// V-statistic ingredients by the direct O(n²) route.
pub fn naive_v_stats(s: &PairedSample, mode: VCentering) -> Result<SquaredStats> {
    s.require("the V-statistic estimator", 2)?;
    let a = pairwise_distances(s.xs())?.into_v_centered(mode);
    let b = pairwise_distances(s.ys())?.into_v_centered(mode);
    stats_from(&a, &b, dcov2_v)
}

/// U-statistic ingredients by the direct O(n²) route.
pub fn naive_u_stats(s: &PairedSample) -> Result<SquaredStats> {
    s.require("the U-statistic estimator", 4)?;
    let a = pairwise_distances(s.xs())?.into_u_centered()?;
    let b = pairwise_distances(s.ys())?.into_u_centered()?;
    stats_from(&a, &b, ucov2)
}

/// Both ingredient sets from a single pair of distance matrices.
pub fn naive_both_stats(s: &PairedSample, mode: VCentering) -> Result<(SquaredStats, SquaredStats)> {
    s.require("the U-statistic estimator", 4)?;
    let dx = pairwise_distances(s.xs())?;
    let dy = pairwise_distances(s.ys())?;
    let v = stats_from(&v_center(&dx, mode), &v_center(&dy, mode), dcov2_v)?;
    let u = stats_from(&dx.into_u_centered()?, &dy.into_u_centered()?, ucov2)?;
    Ok((u, v))
}

/// dCorV: square root of the V-statistic squared distance correlation.
pub fn dcor_v(s: &PairedSample, mode: VCentering) -> Result<DcorEstimate> {
    naive_v_stats(s, mode)?.v_estimate()
}

/// dCorU with the given negative-value policy.
pub fn dcor_u(s: &PairedSample, policy: NegativePolicy) -> Result<DcorEstimate> {
    naive_u_stats(s)?.u_estimate(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn dm(points: Array2<f64>) -> DistanceMatrix {
        pairwise_distances(points.view()).unwrap()
    }

    #[test]
    fn distances_of_identical_points() {
        assert_eq!(dm(array![[0.0], [0.0]]).into_inner(), array![[0.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn distances_one_dimensional() {
        assert_eq!(
            dm(array![[0.0], [1.0], [3.0]]).into_inner(),
            array![[0.0, 1.0, 3.0], [1.0, 0.0, 2.0], [3.0, 2.0, 0.0]]
        );
    }

    #[test]
    fn distances_three_four_five() {
        assert_eq!(dm(array![[0.0, 0.0], [3.0, 4.0]]).into_inner(), array![[0.0, 5.0], [5.0, 0.0]]);
    }

    #[test]
    fn distances_reject_non_finite() {
        let err = pairwise_distances(array![[0.0], [f64::NAN]].view()).unwrap_err();
        assert!(matches!(err, DcorError::NonFinite { .. }));
    }

    #[test]
    fn from_matrix_checks_invariants() {
        assert!(DistanceMatrix::from_matrix(array![[0.0, 1.0], [2.0, 0.0]]).is_err());
        assert!(DistanceMatrix::from_matrix(array![[1.0, 1.0], [1.0, 0.0]]).is_err());
        assert!(DistanceMatrix::from_matrix(array![[0.0, -1.0], [-1.0, 0.0]]).is_err());
        assert!(DistanceMatrix::from_matrix(array![[0.0, 1.0], [1.0, 0.0]]).is_ok());
    }

    #[test]
    fn v_center_zero_matrix() {
        let z = DistanceMatrix::from_matrix(Array2::zeros((2, 2))).unwrap();
        for mode in [VCentering::ZeroDiagonal, VCentering::Classic] {
            assert_eq!(v_center(&z, mode).view(), Array2::<f64>::zeros((2, 2)));
        }
    }

    #[test]
    fn v_center_two_points() {
        let d = DistanceMatrix::from_matrix(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(v_center(&d, VCentering::ZeroDiagonal).view(), array![[0.0, 0.5], [0.5, 0.0]]);
        assert_eq!(v_center(&d, VCentering::Classic).view(), array![[-0.5, 0.5], [0.5, -0.5]]);
    }

    #[test]
    fn u_center_rejects_small_n() {
        let d = dm(array![[0.0], [1.0], [2.0]]);
        assert_eq!(
            u_center(&d).unwrap_err(),
            DcorError::SampleTooSmall { what: "U-centering", n: 3, min: 4 }
        );
    }

    #[test]
    fn u_center_zero_matrix() {
        let z = DistanceMatrix::from_matrix(Array2::zeros((4, 4))).unwrap();
        assert_eq!(u_center(&z).unwrap().view(), Array2::<f64>::zeros((4, 4)));
    }

    #[test]
    fn u_center_matches_direct_formula() {
        // points 0, 1, 2, 4: row sums 7, 5, 5, 9; grand sum 26; n - 2 = 2; (n-1)(n-2) = 6.
        // Ã_kl = a_kl - (r_k + r_l)/2 + 26/6, frozen from a hand evaluation.
        let c = u_center(&dm(array![[0.0], [1.0], [2.0], [4.0]])).unwrap();
        let g = 26.0 / 6.0;
        let expected = array![
            [0.0, 1.0 - 6.0 + g, 2.0 - 6.0 + g, 4.0 - 8.0 + g],
            [1.0 - 6.0 + g, 0.0, 1.0 - 5.0 + g, 3.0 - 7.0 + g],
            [2.0 - 6.0 + g, 1.0 - 5.0 + g, 0.0, 2.0 - 7.0 + g],
            [4.0 - 8.0 + g, 3.0 - 7.0 + g, 2.0 - 7.0 + g, 0.0],
        ];
        for (a, b) in c.view().iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for row in c.view().rows() {
            assert_abs_diff_eq!(row.sum(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dcov2_v_two_points_zero_diagonal() {
        let d = dm(array![[0.0], [1.0]]);
        let a = v_center(&d, VCentering::ZeroDiagonal);
        assert_abs_diff_eq!(dcov2_v(&a, &a).unwrap(), 0.125, epsilon = 1e-15);
        let c = v_center(&d, VCentering::Classic);
        assert_abs_diff_eq!(dcov2_v(&c, &c).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn inner_products_check_kinds_and_sizes() {
        let d4 = dm(array![[0.0], [1.0], [2.0], [4.0]]);
        let d5 = dm(array![[0.0], [1.0], [2.0], [4.0], [7.0]]);
        let u4 = u_center(&d4).unwrap();
        let v4 = v_center(&d4, VCentering::Classic);
        let p4 = v_center(&d4, VCentering::ZeroDiagonal);
        assert!(matches!(ucov2(&u4, &v4), Err(DcorError::CenteringMismatch { .. })));
        assert!(matches!(dcov2_v(&u4, &u4), Err(DcorError::CenteringMismatch { .. })));
        assert!(matches!(dcov2_v(&v4, &p4), Err(DcorError::CenteringMismatch { .. })));
        let u5 = u_center(&d5).unwrap();
        assert_eq!(ucov2(&u4, &u5), Err(DcorError::SizeMismatch(4, 5)));
        let z = u_center(&DistanceMatrix::from_matrix(Array2::zeros((4, 4))).unwrap()).unwrap();
        assert_eq!(ucov2(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn identical_margins_give_one() {
        let s = PairedSample::from_columns(vec![0.3, 1.7, -2.0, 4.1, 0.9], vec![0.3, 1.7, -2.0, 4.1, 0.9]).unwrap();
        for mode in [VCentering::Classic, VCentering::ZeroDiagonal] {
            assert_eq!(dcor_v(&s, mode).unwrap().value, 1.0);
        }
        for policy in NegativePolicy::ALL {
            let e = dcor_u(&s, policy).unwrap();
            assert_eq!(e.value, 1.0);
            assert!(!e.was_negative);
        }
    }

    #[test]
    fn constant_margin_is_degenerate_zero() {
        let s = PairedSample::from_columns(vec![2.0; 6], vec![0.1, 0.5, 0.2, 0.9, 0.4, 0.3]).unwrap();
        let v = dcor_v(&s, VCentering::Classic).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(v.degenerate);
        let u = dcor_u(&s, NegativePolicy::Signed).unwrap();
        assert_eq!(u.value, 0.0);
        assert!(u.degenerate);
    }

    #[test]
    fn u_estimators_need_four_points() {
        let s = PairedSample::from_columns(vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 2.0]).unwrap();
        assert!(matches!(dcor_u(&s, NegativePolicy::Signed), Err(DcorError::SampleTooSmall { min: 4, .. })));
        assert!(dcor_v(&s, VCentering::Classic).is_ok());
        let one = PairedSample::from_columns(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(dcor_v(&one, VCentering::Classic), Err(DcorError::SampleTooSmall { min: 2, .. })));
    }

    #[test]
    fn policies_on_a_negative_statistic() {
        let stats = SquaredStats { cov2_xy: -0.04, var2_x: 1.0, var2_y: 1.0 };
        let signed = stats.u_estimate(NegativePolicy::Signed).unwrap();
        assert_abs_diff_eq!(signed.value, -0.2, epsilon = 1e-15);
        assert!(signed.was_negative);
        assert_abs_diff_eq!(stats.u_estimate(NegativePolicy::Abs).unwrap().value, 0.2, epsilon = 1e-15);
        let t = stats.u_estimate(NegativePolicy::Trunc).unwrap();
        assert_eq!(t.value, 0.0);
        assert!(t.was_negative);
    }

    #[test]
    fn clamping_tolerance() {
        let slightly = SquaredStats { cov2_xy: 1.0 + 1e-9, var2_x: 1.0, var2_y: 1.0 };
        assert_eq!(slightly.v_estimate().unwrap().value, 1.0);
        let far = SquaredStats { cov2_xy: 1.1, var2_x: 1.0, var2_y: 1.0 };
        assert!(matches!(far.v_estimate(), Err(DcorError::Inconsistent(_))));
        let neg_prod = SquaredStats { cov2_xy: 0.3, var2_x: -1.0, var2_y: 1.0 };
        let e = neg_prod.u_estimate(NegativePolicy::Signed).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.degenerate);
    }
}
