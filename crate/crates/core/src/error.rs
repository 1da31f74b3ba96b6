//! Error type shared by all statistical operations.

use thiserror::Error;

/// Errors produced by grid construction, statistics, and calibration.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Two curves (or a curve and an operator) live on different grids.
    #[error("grid mismatch: operands are defined on different grids")]
    GridMismatch,

    /// A grid, curve, or parameter failed a structural check.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The sample is too small for the requested statistic.
    #[error("sample too small: need at least {needed} curves, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    /// The estimated null distribution carries no positive eigenvalue.
    #[error("null distribution degenerate")]
    DegenerateNull,

    /// A zero curve was passed where a nonzero one is required
    /// (Hessian evaluation, or a zero pair sum in the signed-rank drift).
    #[error("zero curve: {0}")]
    ZeroCurve(String),

    /// T3 standardization hit a zero eigenvalue.
    #[error("standardization undefined: eigenvalue {index} is zero")]
    StandardizationUndefined { index: usize },

    /// A projection dimension exceeds the available spectrum.
    #[error("requested {requested} eigenpairs but only {available} are available")]
    SpectrumExhausted { requested: usize, available: usize },

    /// A shift component with nonzero coefficient sits on a zero eigenvalue.
    #[error("shift component lies in the kernel of the covariance operator")]
    ShiftInKernel,
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
