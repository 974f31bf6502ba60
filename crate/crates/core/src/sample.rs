use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{DcorError, Result};

/// `n` paired observations of `X ∈ R^p` and `Y ∈ R^q`, stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    xs: Array2<f64>,
    ys: Array2<f64>,
}

pub(crate) fn check_finite(side: &'static str, m: ArrayView2<'_, f64>) -> Result<()> {
    for ((row, col), v) in m.indexed_iter() {
        if !v.is_finite() {
            return Err(DcorError::NonFinite { side, row, col });
        }
    }
    Ok(())
}

impl PairedSample {
    pub fn new(xs: Array2<f64>, ys: Array2<f64>) -> Result<Self> {
        if xs.nrows() != ys.nrows() {
            return Err(DcorError::RowMismatch {
                x: xs.nrows(),
                y: ys.nrows(),
            });
        }
        if xs.nrows() == 0 {
            return Err(DcorError::SampleTooSmall {
                what: "a paired sample",
                n: 0,
                min: 1,
            });
        }
        if xs.ncols() == 0 || ys.ncols() == 0 {
            return Err(DcorError::InvalidParameter(
                "x and y need at least one column each".into(),
            ));
        }
        check_finite("x", xs.view())?;
        check_finite("y", ys.view())?;
        Ok(Self { xs, ys })
    }

    /// Univariate sample from two equally long columns.
    pub fn from_columns(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let (nx, ny) = (x.len(), y.len());
        let xs = Array2::from_shape_vec((nx, 1), x).expect("column shape");
        let ys = Array2::from_shape_vec((ny, 1), y).expect("column shape");
        Self::new(xs, ys)
    }

    pub fn n(&self) -> usize {
        self.xs.nrows()
    }

    pub fn p(&self) -> usize {
        self.xs.ncols()
    }

    pub fn q(&self) -> usize {
        self.ys.ncols()
    }

    pub fn xs(&self) -> ArrayView2<'_, f64> {
        self.xs.view()
    }

    pub fn ys(&self) -> ArrayView2<'_, f64> {
        self.ys.view()
    }

    pub fn is_univariate(&self) -> bool {
        self.p() == 1 && self.q() == 1
    }

    /// The single X column when `p == 1`.
    pub fn x_column(&self) -> Option<ArrayView1<'_, f64>> {
        (self.p() == 1).then(|| self.xs.index_axis(Axis(1), 0))
    }

    pub fn y_column(&self) -> Option<ArrayView1<'_, f64>> {
        (self.q() == 1).then(|| self.ys.index_axis(Axis(1), 0))
    }

    /// Same observations with the roles of X and Y exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            xs: self.ys.clone(),
            ys: self.xs.clone(),
        }
    }

    pub(crate) fn require(&self, what: &'static str, min: usize) -> Result<()> {
        if self.n() < min {
            return Err(DcorError::SampleTooSmall {
                what,
                n: self.n(),
                min,
            });
        }
        Ok(())
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>) {
        (self.xs, self.ys)
    }
}
