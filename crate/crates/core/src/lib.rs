//! Nonparametric estimation of multivariate Hawkes processes.
//!
//! Event streams are binned at width `Δ`, the resulting count sequence is
//! fitted as an INAR(p)/VAR(p) model by conditional least squares, and the
//! rescaled coefficients estimate the excitation functions on the grid
//! `Δ, 2Δ, ..., pΔ` together with the baseline intensities. Sandwich
//! covariances give confidence intervals; AIC and a bin-size scan choose
//! the tuning parameters; time-change residuals validate a fitted model.

/// Version of this library, recorded in CLI manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod cls;
pub mod diagnostics;
pub mod error;
pub mod events;
pub mod experiment;
pub mod grid;
pub mod hawkes_model;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod rng;
pub mod selection;
pub mod simulate;
pub mod smoothing;

pub use cls::{
    build_design, cls_fit, confidence_interval, covariance_estimate, hawkes_estimator,
    hawkes_estimator_with, ClsFit, DesignMatrices, DesignStorage, EstimatorOptions, HawkesFit,
    Interval, Target,
};
pub use diagnostics::{
    diagnose, ks_exp1, serial_independence, time_change_residuals, DiagnosticsOptions,
    DiagnosticsReport, IntensityModel,
};
pub use error::{HawkesError, Result};
pub use events::{bin_counts, dedupe, BinCountSequence, EventStream, Window};
pub use experiment::{replicate, ReplicationConfig, ReplicationReport};
pub use hawkes_model::{
    branching_from_fit, branching_matrix, stability_check, BranchingEstimate, BranchingMatrix,
    HawkesSpec,
};
pub use kernel::{Excitation, Kernel};
pub use rng::RandomSource;
pub use selection::{aic_value, select_bin_size, select_support, AicScan, BinSizeScan};
pub use simulate::{simulate_hawkes, simulate_inar, HawkesSimOptions, InarSpec};
pub use smoothing::{box_smooth, integrate_pointwise, SmoothedExcitement};
