//! Crate-wide error type. Every fallible public operation returns
//! [`Result`] with one of these variants.

use thiserror::Error;

/// Unified error type for simulation, certification, and training.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or vector dimensions do not agree with the declared shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A noise covariance failed the symmetric positive-semidefinite check.
    #[error("covariance is not symmetric PSD: {0}")]
    NotPsd(String),

    /// A fixed-point or eigenvalue iteration exhausted its iteration budget.
    #[error("iteration did not converge within {max_iter} steps (last delta {last_delta:.3e})")]
    NonConvergence { max_iter: usize, last_delta: f64 },

    /// A random draw kept producing degenerate samples (e.g. near-nilpotent A).
    #[error("degenerate random draw: {0}")]
    DegenerateDraw(String),

    /// A state or channel index lies outside its space.
    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },

    /// An action violates its scenario's constraint set.
    #[error("action constraint violated: {0}")]
    ConstraintViolation(String),

    /// A power allocation exceeds the per-sensor budget.
    #[error("power budget violated: {0}")]
    PowerBudgetViolation(String),

    /// The joint channel space is too large to materialize for certification.
    #[error("joint channel space of size {size} exceeds cap {cap}")]
    JointSpaceTooLarge { size: u128, cap: usize },

    /// A Gaussian head received a non-positive standard deviation.
    #[error("non-positive standard deviation {0}")]
    NonPositiveStd(f64),

    /// Stored parameters do not match the declared network shape.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A gradient became NaN or infinite during optimization.
    #[error("non-finite gradient encountered at step {0}")]
    NonFiniteGradient(u64),

    /// Instance generation hit the resampling cap without a certified draw.
    #[error("resampling cap {0} exceeded while searching for a stable instance")]
    ResampleCapExceeded(usize),

    /// A symmetric positive-definite solve failed (matrix numerically singular).
    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    /// Configuration value out of its documented domain.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
