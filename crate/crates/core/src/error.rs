//! Error type shared by all modules.

use alloc::string::String;

/// Errors produced by geometry construction, simulation, and estimation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DoaError {
    /// A constructor or operation was handed an argument outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Element index outside `1..=N`.
    #[error("element index {index} out of range 1..={n_elements}")]
    ElementIndexOutOfRange { index: usize, n_elements: usize },

    /// Two requested source directions are identical.
    #[error("degenerate directions: at least two source directions coincide")]
    DegenerateDirections,

    /// Array too small for the requested source count: the partial-covariance
    /// partition needs `N - 2P >= 2`.
    #[error("insufficient elements: N={n_elements} supports at most P={}, got P={p_sources}", (n_elements.saturating_sub(2)) / 2)]
    InsufficientElements { n_elements: usize, p_sources: usize },

    /// A noise covariance description is not symmetric positive definite
    /// (or otherwise unusable).
    #[error("bad noise covariance: {0}")]
    BadNoiseCovariance(String),

    /// A covariance block required by a propagator fit is numerically rank
    /// deficient. Fully coherent sources and misdeclared source counts end
    /// up here.
    #[error("singular covariance block (reciprocal condition {rcond:.3e})")]
    SingularBlock { rcond: f64 },

    /// An iterative numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    NumericalFailure(&'static str),
}

impl DoaError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DoaError::InvalidParameter(msg.into())
    }
}
