//! Full optimization/sampling loops and the pass-rate sweep.
//!
//! Every ensemble method runs through one engine (see `engine.rs`): per
//! iteration it builds the preconditioner, computes drifts, takes an
//! Euler–Maruyama step for every particle, reweights with the fitness source
//! and resamples when the max/min weight ratio crosses the threshold. The
//! named algorithms are configurations of that engine:
//!
//! | algorithm        | drift                    | fitness | resampling |
//! |------------------|--------------------------|---------|------------|
//! | RILD             | exact or derivative-free | `W`     | threshold  |
//! | gradient-free    | none                     | `W`     | threshold  |
//! | EKS              | derivative-free          | 0       | never      |
//! | EKI              | derivative-free, no prior| 0       | never, σ=0 |
//!
//! GLD is a single Euler–Maruyama chain and has its own loop.

mod engine;
mod gld;
mod sweep;

use nalgebra::DVector;
use serde::Serialize;

use crate::config::RunConfig;
use crate::ensemble::Ensemble;

pub use engine::{run_eki, run_eks, run_rild, run_rild_gradfree};
pub use gld::{run_gld, run_gld_chain};
pub use sweep::{pass_rate_sweep, SweepAlgorithm, SweepCell, SweepResult, SweepSpec};

/// Statistics recorded after each iteration (row 0 is the initial ensemble).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationStats {
    pub iteration: usize,
    /// Weighted mean of the potential over the current ensemble.
    pub mean_potential: f64,
    /// Smallest potential seen so far, over every evaluated point.
    pub best_potential: f64,
    /// Cumulative potential (or forward-map) evaluations.
    pub evaluations: u64,
    /// Stepsize used for this iteration; 0 for the initial row.
    pub tau: f64,
    pub resampled: bool,
}

/// Trace of one algorithm run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub problem: String,
    pub fitness: String,
    pub config: RunConfig,
    pub iterations: Vec<IterationStats>,
    pub final_ensemble: Ensemble,
    pub snapshots: Vec<(usize, Ensemble)>,
    /// Point attaining `best_potential`, if anything was evaluated.
    pub best_point: Option<DVector<f64>>,
}

impl RunRecord {
    pub fn best_potential(&self) -> f64 {
        self.iterations
            .last()
            .map_or(f64::INFINITY, |s| s.best_potential)
    }

    pub fn evaluations(&self) -> u64 {
        self.iterations.last().map_or(0, |s| s.evaluations)
    }

    pub fn final_mean_potential(&self) -> Option<f64> {
        self.iterations.last().map(|s| s.mean_potential)
    }

    pub fn mean_potential_at(&self, iteration: usize) -> Option<f64> {
        self.iterations
            .iter()
            .find(|s| s.iteration == iteration)
            .map(|s| s.mean_potential)
    }

    pub fn resample_count(&self) -> usize {
        self.iterations.iter().filter(|s| s.resampled).count()
    }

    pub fn snapshot(&self, iteration: usize) -> Option<&Ensemble> {
        self.snapshots
            .iter()
            .find(|(it, _)| *it == iteration)
            .map(|(_, e)| e)
    }
}
