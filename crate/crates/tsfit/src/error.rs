//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A covariance pivot fell below the positive-definiteness floor.
    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { pivot: f64, index: usize },

    /// Input matrix deviates from symmetry beyond tolerance.
    #[error("matrix is not symmetric (max deviation {dev:.3e})")]
    NotSymmetric { dev: f64 },

    /// Two distributions with different numbers of classes.
    #[error("distribution arity mismatch: {left} vs {right}")]
    ArityMismatch { left: usize, right: usize },

    /// A feature subset violated its preconditions (empty, out of bounds,
    /// or not a strict subset where one is required).
    #[error("invalid feature subset: {0}")]
    InvalidSubset(String),

    /// Prediction requested on a zero-length prefix.
    #[error("prediction requires a non-empty prefix")]
    EmptyPrefix,

    /// Importance requested at a timestep with no preceding observation.
    #[error("no predictive shift is defined at t={t}")]
    InvalidTime { t: usize },

    /// Training loss became non-finite.
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },

    /// Bootstrap reservoir for a feature holds no values.
    #[error("empty value reservoir for feature {feature}")]
    EmptyReservoir { feature: usize },

    /// Weighted ridge system stayed singular after all fallback penalties.
    #[error("singular local surrogate fit (lambda up to {lambda:.3e})")]
    SingularFit { lambda: f64 },

    /// Ground truth contains a single class only.
    #[error("degenerate labels: ground truth is all-{0}")]
    DegenerateLabels(u8),

    /// Rank correlation undefined because one input has constant ranks.
    #[error("zero variance in rank vector")]
    ZeroVariance,

    /// A configuration field failed validation.
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// Structured-text parse failure with location diagnostics.
    #[error("format error at line {line} ({field}): {reason}")]
    Format {
        line: usize,
        field: String,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
