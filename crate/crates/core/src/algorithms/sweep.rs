use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_gld, run_rild, RunRecord};
use crate::config::RunConfig;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::problem::{FitnessSource, Potential};
use crate::rng::{derive_seed, RngStream, START_PICK_STREAM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAlgorithm {
    Rild,
    Gld,
}

/// A `(τ, σ)` grid of repeated trials.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub algorithm: SweepAlgorithm,
    pub taus: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub trials: usize,
    /// A trial passes once its best potential drops strictly below this value.
    pub target: f64,
    /// Shared settings; `tau`, `sigma` and `seed` are overwritten per trial.
    /// `template.seed` is the master seed.
    pub template: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub tau: f64,
    pub sigma: f64,
    pub trials: usize,
    pub passes: usize,
    /// Trials that ended in a divergence; they count as failed.
    pub diverged: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub algorithm: SweepAlgorithm,
    pub target: f64,
    /// Row-major over `taus`, then `sigmas`.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, tau: f64, sigma: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.tau == tau && c.sigma == sigma)
    }

    pub fn any_passing(&self) -> bool {
        self.cells.iter().any(|c| c.passes > 0)
    }
}

enum Outcome {
    Pass,
    Fail,
    Diverged,
}

/// Runs every `(τ, σ)` cell `spec.trials` times from the shared `initial`
/// ensemble. Trial `t` of cell `c` uses seed `derive_seed(master, c·trials + t)`;
/// a GLD trial starts from a member of `initial` picked with that seed.
pub fn pass_rate_sweep(
    problem: &dyn Potential,
    fitness: &FitnessSource,
    spec: &SweepSpec,
    initial: &Ensemble,
) -> Result<SweepResult> {
    if spec.taus.is_empty() || spec.sigmas.is_empty() || spec.trials == 0 {
        return Err(Error::Config(
            "sweep grid and trial count must be nonempty".into(),
        ));
    }
    if spec
        .taus
        .iter()
        .chain(&spec.sigmas)
        .any(|v| !(v.is_finite() && *v > 0.0))
    {
        return Err(Error::Config("sweep grid values must be positive".into()));
    }
    let grid: Vec<(f64, f64)> = spec
        .taus
        .iter()
        .flat_map(|&t| spec.sigmas.iter().map(move |&s| (t, s)))
        .collect();
    let master = spec.template.seed;
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..spec.trials).map(move |t| (c, t)))
        .collect();

    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let (tau, sigma) = grid[c];
            let cfg = RunConfig {
                tau,
                sigma,
                seed: derive_seed(master, (c * spec.trials + t) as u64),
                ..spec.template.clone()
            };
            run_trial(problem, fitness, spec.algorithm, &cfg, initial)
                .map(|rec| classify(&rec, spec.target))
                .or_else(|err| match err {
                    Error::Divergence { .. } => Ok(Outcome::Diverged),
                    other => Err(other),
                })
        })
        .collect::<Result<_>>()?;

    let cells = grid
        .iter()
        .enumerate()
        .map(|(c, &(tau, sigma))| {
            let slice = &outcomes[c * spec.trials..(c + 1) * spec.trials];
            let passes = slice.iter().filter(|o| matches!(o, Outcome::Pass)).count();
            let diverged = slice
                .iter()
                .filter(|o| matches!(o, Outcome::Diverged))
                .count();
            SweepCell {
                tau,
                sigma,
                trials: spec.trials,
                passes,
                diverged,
                rate: passes as f64 / spec.trials as f64,
            }
        })
        .collect();
    Ok(SweepResult {
        algorithm: spec.algorithm,
        target: spec.target,
        cells,
    })
}

fn classify(rec: &RunRecord, target: f64) -> Outcome {
    if rec.best_potential() < target {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn run_trial(
    problem: &dyn Potential,
    fitness: &FitnessSource,
    algorithm: SweepAlgorithm,
    cfg: &RunConfig,
    initial: &Ensemble,
) -> Result<RunRecord> {
    match algorithm {
        SweepAlgorithm::Rild => run_rild(problem, fitness, cfg, initial),
        SweepAlgorithm::Gld => {
            let mut pick = RngStream::new(cfg.seed, START_PICK_STREAM);
            let i = pick.random_range(0..initial.len());
            run_gld(problem, cfg, &initial.particle(i).into_owned())
        }
    }
}
