use thiserror::Error;

/// Errors raised by the estimators, samplers and harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DcorError {
    #[error("non-finite value in {side} at row {row}, column {col}")]
    NonFinite {
        side: &'static str,
        row: usize,
        col: usize,
    },

    #[error("row count mismatch: x has {x} rows, y has {y}")]
    RowMismatch { x: usize, y: usize },

    #[error("{what} requires n >= {min}, got n = {n}")]
    SampleTooSmall {
        what: &'static str,
        n: usize,
        min: usize,
    },

    #[error("matrix size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("centering mismatch: expected {expected}, got {got}")]
    CenteringMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("internal consistency failure: correlation {0} exceeds 1 beyond tolerance")]
    Inconsistent(f64),
}

pub type Result<T> = std::result::Result<T, DcorError>;
