use thiserror::Error;

use crate::algorithms::RunRecord;

/// Errors raised by the particle algorithms and the spectral diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid run configuration or a problem that lacks a required capability.
    #[error("configuration error: {0}")]
    Config(String),

    /// Mismatched vector or matrix dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A potential or forward map returned a non-finite value.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A covariance matrix failed its Cholesky factorization.
    #[error("matrix `{0}` is not symmetric positive definite")]
    NotPositiveDefinite(&'static str),

    /// A fitness value exceeded the declared upper bound of its source.
    #[error("fitness value {value} exceeds declared upper bound {bound}")]
    FitnessBound { value: f64, bound: f64 },

    /// Every reweighted weight underflowed to zero.
    #[error("weight collapse: all reweighted weights vanished")]
    WeightCollapse,

    /// A single Euler–Maruyama step produced a non-finite state.
    #[error("non-finite state after Langevin step (stepsize too large?)")]
    NonFiniteStep,

    /// A run left the finite domain; `partial` holds the trace up to the failure.
    #[error("run diverged at iteration {iteration}: {reason}")]
    Divergence {
        iteration: usize,
        reason: String,
        partial: Box<RunRecord>,
    },

    /// Eigensolver or linear-solve failure in the spectral module.
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
