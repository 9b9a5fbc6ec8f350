use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("spectrum is not conjugate symmetric: imaginary residual {residual:e} exceeds {tol:e}")]
    NotConjugateSymmetric { residual: f64, tol: f64 },

    #[error("parameter shapes do not match the architecture: {0}")]
    ShapeMismatch(String),

    #[error("predictor is identically zero")]
    ZeroPredictor,

    #[error("balanced factorization produced non-real layers (imaginary residual {0:e})")]
    PhaseSymmetryViolation(f64),

    #[error("exponent {0:.1} exceeds the overflow guard")]
    Overflow(f64),

    #[error("loss grew from {from:e} to {to:e} within 100 iterations at step {step}")]
    Diverged { step: usize, from: f64, to: f64 },

    #[error("predictor has non-positive minimum margin {0:e}")]
    NonPositiveMargin(f64),

    #[error("predictor is not normalized to unit margin (minimum margin {0})")]
    NonUnitMargin(f64),

    #[error("support set is empty")]
    EmptySupport,

    #[error("Jacobian action vanished (norm {0:e})")]
    ZeroJacobianAction(f64),

    #[error("penalty oracle did not reach a feasible point (violation {0:e})")]
    DidNotConverge(f64),

    #[error("dataset generation failed after {0} rounds")]
    GenerationFailed(usize),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
