use alloc::boxed::Box;
use alloc::string::String;

use crate::estimators::Estimate;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the library can report. Variant names double as the
/// stable error identifiers printed by the command line frontend.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("InvalidGroundSet: ground set size {0} must be >= 3 and divisible by 3")]
    InvalidGroundSet(usize),
    #[error("InvalidInstance: {0}")]
    InvalidInstance(String),
    #[error("NotACover: {0}")]
    NotACover(String),
    #[error("SparsityViolation: {nnz} nonzeros exceed the allowed {allowed}")]
    SparsityViolation { nnz: usize, allowed: usize },
    #[error("NotASolution: residual {residual} is not below 1/2")]
    NotASolution { residual: f64 },
    #[error("DecodeInconsistency: {0}")]
    DecodeInconsistency(String),
    #[error("BudgetExceeded: {needed} candidates exceed the budget of {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("ShapeError: {0}")]
    ShapeError(String),
    #[error("NonConverged: no certificate after {sweeps} sweeps")]
    NonConverged { sweeps: usize, best: Box<Estimate> },
    #[error("ZeroVector: quotient undefined for the zero vector")]
    ZeroVector,
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
    #[error("CalibrationFailed: {0}")]
    CalibrationFailed(String),
    #[error("ConstructionFailed: {0}")]
    ConstructionFailed(String),
    #[error("PrecisionTooCoarse: level {l} is below the required {required}")]
    PrecisionTooCoarse { l: u32, required: u32 },
    #[error("InvalidAdvice: {0}")]
    InvalidAdvice(String),
}

impl Error {
    /// Stable identifier of the variant, e.g. `"BudgetExceeded"`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidGroundSet(_) => "InvalidGroundSet",
            Error::InvalidInstance(_) => "InvalidInstance",
            Error::NotACover(_) => "NotACover",
            Error::SparsityViolation { .. } => "SparsityViolation",
            Error::NotASolution { .. } => "NotASolution",
            Error::DecodeInconsistency(_) => "DecodeInconsistency",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::ShapeError(_) => "ShapeError",
            Error::NonConverged { .. } => "NonConverged",
            Error::ZeroVector => "ZeroVector",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::CalibrationFailed(_) => "CalibrationFailed",
            Error::ConstructionFailed(_) => "ConstructionFailed",
            Error::PrecisionTooCoarse { .. } => "PrecisionTooCoarse",
            Error::InvalidAdvice(_) => "InvalidAdvice",
        }
    }
}
