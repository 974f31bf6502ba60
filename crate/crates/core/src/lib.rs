//! Distance correlation estimators: V- and U-statistics, an O(n log n)
//! univariate path, an MSE-weighted convex combination of the two, benchmark
//! models with exact oracles, and a Monte Carlo harness.

pub mod combiner;
pub mod distance;
pub mod error;
pub mod fast;
pub mod models;
pub mod rng;
pub mod sample;
pub mod sim;

pub use combiner::{dcor_combo, lambda_opt, BandwidthRule, BootstrapConfig, ComboEstimate, MomentSummary, Moments};
pub use distance::{dcor_u, dcor_v, DcorEstimate, NegativePolicy, VCentering, Variant};
pub use error::{DcorError, Result};
pub use fast::{dcor_auto, Dispatch, Path, PointEstimator};
pub use models::{exact_dcor, sample_model, ModelSpec, OracleResult};
pub use sample::PairedSample;
pub use sim::{run_simulation, EstimatorKind, SimConfig, SimReport};
