//! Reweighted interacting Langevin diffusions.
//!
//! An ensemble of particles follows preconditioned Langevin dynamics
//! `dx = −C∇V dt + √(σ²C) dB` while carrying weights updated by a fitness
//! source `W`; weights are reset by multinomial resampling once they spread
//! too far. The crate provides:
//!
//! * [`algorithms`]: RILD, its gradient-free variant, GLD, EKS and EKI loops and
//!   the pass-rate sweep;
//! * [`problems`]: Ackley, the elliptic boundary-value inverse problem, the
//!   Rosenbrock-map least-squares problem and affine test problems;
//! * [`spectral`]: Fourier discretizations of the 1-d generators and their
//!   eigen-diagnostics.
//!
//! Lower-level building blocks ([`ensemble`], [`dynamics`], [`reweight`],
//! [`rng`]) are public so that single steps can be tested and composed.

pub mod algorithms;
pub mod config;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod problem;
pub mod problems;
pub mod reweight;
pub mod rng;
pub mod spectral;

pub use algorithms::{
    pass_rate_sweep, run_eki, run_eks, run_gld, run_gld_chain, run_rild, run_rild_gradfree,
    IterationStats, RunRecord, SweepAlgorithm, SweepCell, SweepResult, SweepSpec,
};
pub use config::{CovarianceMode, DriftMode, RunConfig};
pub use ensemble::Ensemble;
pub use error::{Error, Result};
pub use problem::{FitnessKind, FitnessSource, LeastSquaresProblem, ObjectiveProblem, Potential};
