//! Hard instances and estimators for sparse linear regression.
//!
//! The crate builds the exact-3-cover reduction matrix and the calibrated
//! ill-conditioned designs derived from it, implements the best-subset
//! (`l0`), Lasso and thresholded-Lasso estimators, estimates restricted
//! eigenvalue constants, and runs seeded Monte-Carlo prediction-risk
//! experiments. Everything here is `no_std` + `alloc`; file formats and the
//! command-line frontend live in the `sparsegap` crate.
#![no_std]

extern crate alloc;

mod error;
pub mod estimators;
pub mod experiments;
pub mod hard_design;
pub mod linalg;
pub mod re_cond;
pub mod seed;
pub mod x3c;

pub use error::{Error, Result};
pub use estimators::{Estimate, EstimatorKind, RegressionProblem, SparseEstimator};
pub use experiments::{ExperimentReport, ExperimentRow, GapConfig};
pub use hard_design::{HardDesign, HardDesignParams};
pub use re_cond::{ConeSpec, REEstimate};
pub use x3c::{BinarySolution, CoverMatrix, ExactCover, TripleIndex, X3CInstance};

/// Default number of candidate subsets/supports an exhaustive search may visit.
pub const DEFAULT_BUDGET: u128 = 10_000_000;
