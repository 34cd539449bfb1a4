use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Potential;

/// Default max/min weight ratio that triggers multinomial resampling.
pub const DEFAULT_RESAMPLE_THRESHOLD: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceMode {
    /// `C = I`; noise is a `d`-dimensional standard Gaussian.
    Identity,
    /// `C` is the weighted ensemble covariance; noise enters through its `d × N` factor.
    WeightedCovariance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftMode {
    ExactGradient,
    /// Ensemble approximation of `C∇V`; needs a least-squares problem.
    DerivativeFree,
}

/// Parameters shared by every particle algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub particles: usize,
    /// Stepsize, or the base stepsize `τ₀` when `adaptive_step` is on.
    pub tau: f64,
    pub sigma: f64,
    pub max_iters: usize,
    /// Resample when `max w / min w` exceeds this; `f64::INFINITY` disables resampling.
    pub threshold: f64,
    pub seed: u64,
    pub covariance: CovarianceMode,
    pub drift: DriftMode,
    pub adaptive_step: bool,
    /// Stop before the cumulative number of potential evaluations would exceed this.
    pub max_evals: Option<u64>,
    /// Iterations at which the ensemble is copied into the run record.
    pub snapshot_iters: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            particles: 50,
            tau: 0.1,
            sigma: 1.0,
            max_iters: 100,
            threshold: DEFAULT_RESAMPLE_THRESHOLD,
            seed: 0,
            covariance: CovarianceMode::Identity,
            drift: DriftMode::ExactGradient,
            adaptive_step: false,
            max_evals: None,
            snapshot_iters: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::Config("particles must be positive".into()));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Config(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Config(format!(
                "sigma must be nonnegative, got {}",
                self.sigma
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if self.threshold.is_nan() || self.threshold <= 1.0 {
            return Err(Error::Config(format!(
                "threshold must exceed 1 (or be infinite), got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Validates the config together with the capabilities of `problem`.
    pub fn validate_for(&self, problem: &dyn Potential) -> Result<()> {
        self.validate()?;
        if self.drift == DriftMode::DerivativeFree && problem.as_least_squares().is_none() {
            return Err(Error::Config(
                "derivative-free drift requires a least-squares problem".into(),
            ));
        }
        if self.drift == DriftMode::DerivativeFree
            && self.covariance != CovarianceMode::WeightedCovariance
        {
            return Err(Error::Config(
                "derivative-free drift approximates C∇V for the weighted covariance C; \
                 set covariance = weighted-covariance"
                    .into(),
            ));
        }
        Ok(())
    }
}
