use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{IterationStats, RunRecord};
use crate::config::{CovarianceMode, DriftMode, RunConfig};
use crate::dynamics::{
    adaptive_timestep, exact_preconditioned_drift, langevin_step, DerivativeFreeDrift,
    Preconditioner, StepInputs,
};
use crate::ensemble::{uniform_weights, Ensemble};
use crate::error::{Error, Result};
use crate::problem::{Evaluation, FitnessSource, LeastSquaresProblem, Potential};
use crate::reweight::{resample_indices, update_weights, weight_ratio};
use crate::rng::{RngStream, RESAMPLE_STREAM};

#[derive(Clone, Copy, Debug, PartialEq)]
enum DriftKind {
    None,
    Exact,
    DerivativeFree { prior: bool },
}

/// Reweighted interacting Langevin diffusion.
///
/// Drift and preconditioner follow `cfg.drift` / `cfg.covariance`; particles
/// are reweighted by `exp(τ W)` and resampled once `max w / min w` exceeds
/// `cfg.threshold`.
pub fn run_rild(
    problem: &dyn Potential,
    fitness: &FitnessSource,
    cfg: &RunConfig,
    initial: &Ensemble,
) -> Result<RunRecord> {
    cfg.validate_for(problem)?;
    let drift = match cfg.drift {
        DriftMode::ExactGradient => {
            if !problem.has_gradient() {
                return Err(Error::Config(format!(
                    "{} has no gradient; use derivative-free drift or the gradient-free variant",
                    problem.name()
                )));
            }
            DriftKind::Exact
        }
        DriftMode::DerivativeFree => DriftKind::DerivativeFree { prior: true },
    };
    run_ensemble("rild", problem, fitness, cfg, initial, drift)
}

/// RILD without the gradient term: pure diffusion plus reweighting.
pub fn run_rild_gradfree(
    problem: &dyn Potential,
    fitness: &FitnessSource,
    cfg: &RunConfig,
    initial: &Ensemble,
) -> Result<RunRecord> {
    cfg.validate()?;
    run_ensemble(
        "rild-gradfree",
        problem,
        fitness,
        cfg,
        initial,
        DriftKind::None,
    )
}

/// Ensemble Kalman sampler: covariance-preconditioned derivative-free drift,
/// no reweighting.
pub fn run_eks(
    problem: &LeastSquaresProblem,
    cfg: &RunConfig,
    initial: &Ensemble,
) -> Result<RunRecord> {
    let cfg = kalman_config(cfg, initial)?;
    run_ensemble(
        "eks",
        problem,
        &FitnessSource::zero(),
        &cfg,
        initial,
        DriftKind::DerivativeFree { prior: true },
    )
}

/// Ensemble Kalman inversion: the EKS loop with `σ = 0` and only the misfit drift.
pub fn run_eki(
    problem: &LeastSquaresProblem,
    cfg: &RunConfig,
    initial: &Ensemble,
) -> Result<RunRecord> {
    let mut cfg = kalman_config(cfg, initial)?;
    cfg.sigma = 0.0;
    run_ensemble(
        "eki",
        problem,
        &FitnessSource::zero(),
        &cfg,
        initial,
        DriftKind::DerivativeFree { prior: false },
    )
}

fn kalman_config(cfg: &RunConfig, initial: &Ensemble) -> Result<RunConfig> {
    if initial.len() < 2 {
        return Err(Error::Config("ensemble Kalman methods need N >= 2".into()));
    }
    Ok(RunConfig {
        covariance: CovarianceMode::WeightedCovariance,
        drift: DriftMode::DerivativeFree,
        threshold: f64::INFINITY,
        ..cfg.clone()
    })
}

struct Tracker {
    iterations: Vec<IterationStats>,
    snapshots: Vec<(usize, Ensemble)>,
    best: f64,
    best_point: Option<DVector<f64>>,
    evaluations: u64,
}

impl Tracker {
    fn observe(&mut self, positions: &DMatrix<f64>, evals: &[Evaluation]) {
        for (x, ev) in positions.column_iter().zip(evals) {
            if ev.potential < self.best {
                self.best = ev.potential;
                self.best_point = Some(x.into_owned());
            }
        }
        self.evaluations += evals.len() as u64;
    }

    fn push(
        &mut self,
        iteration: usize,
        ensemble: &Ensemble,
        evals: &[Evaluation],
        tau: f64,
        resampled: bool,
        cfg: &RunConfig,
    ) {
        let mean_potential = ensemble
            .weights()
            .iter()
            .zip(evals)
            .map(|(w, ev)| w * ev.potential)
            .sum();
        self.iterations.push(IterationStats {
            iteration,
            mean_potential,
            best_potential: self.best,
            evaluations: self.evaluations,
            tau,
            resampled,
        });
        if cfg.snapshot_iters.contains(&iteration) {
            self.snapshots.push((iteration, ensemble.clone()));
        }
    }

    fn finish(
        self,
        algorithm: &str,
        problem: &dyn Potential,
        fitness: &FitnessSource,
        cfg: &RunConfig,
        ensemble: Ensemble,
    ) -> RunRecord {
        RunRecord {
            algorithm: algorithm.to_string(),
            problem: problem.name().to_string(),
            fitness: format!("{:?}", fitness.kind()),
            config: cfg.clone(),
            iterations: self.iterations,
            final_ensemble: ensemble,
            snapshots: self.snapshots,
            best_point: self.best_point,
        }
    }
}

fn evaluate_all(problem: &dyn Potential, ensemble: &Ensemble) -> Result<Vec<Evaluation>> {
    (0..ensemble.len())
        .into_par_iter()
        .map(|i| problem.evaluate(&ensemble.particle(i).into_owned()))
        .collect()
}

fn forward_matrix(evals: &[Evaluation]) -> Result<DMatrix<f64>> {
    let cols: Vec<DVector<f64>> = evals
        .iter()
        .map(|e| {
            e.forward.clone().ok_or_else(|| {
                Error::Config("derivative-free drift needs forward-map values".into())
            })
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&cols))
}

fn is_divergence(err: &Error) -> bool {
    matches!(
        err,
        Error::NonFiniteStep | Error::Evaluation(_) | Error::WeightCollapse
    )
}

fn run_ensemble(
    algorithm: &str,
    problem: &dyn Potential,
    fitness: &FitnessSource,
    cfg: &RunConfig,
    initial: &Ensemble,
    drift_kind: DriftKind,
) -> Result<RunRecord> {
    let n = initial.len();
    if initial.dim() != problem.dim() {
        return Err(Error::Shape(format!(
            "ensemble dimension {} does not match problem dimension {}",
            initial.dim(),
            problem.dim()
        )));
    }
    if n != cfg.particles {
        return Err(Error::Config(format!(
            "initial ensemble has {n} particles, config asks for {}",
            cfg.particles
        )));
    }
    let ls = match drift_kind {
        DriftKind::DerivativeFree { .. } => Some(problem.as_least_squares().ok_or_else(|| {
            Error::Config("derivative-free drift requires a least-squares problem".into())
        })?),
        _ => None,
    };

    let mut tracker = Tracker {
        iterations: Vec::new(),
        snapshots: Vec::new(),
        best: f64::INFINITY,
        best_point: None,
        evaluations: 0,
    };
    let budget = cfg.max_evals.unwrap_or(u64::MAX);
    let mut ensemble = initial.clone();
    if (n as u64) > budget {
        return Ok(tracker.finish(algorithm, problem, fitness, cfg, ensemble));
    }

    let mut evals = evaluate_all(problem, &ensemble)?;
    tracker.observe(ensemble.positions(), &evals);
    tracker.push(0, &ensemble, &evals, 0.0, false, cfg);

    let mut particle_rngs: Vec<RngStream> =
        (0..n).map(|i| RngStream::particle(cfg.seed, i)).collect();
    let mut resample_rng = RngStream::new(cfg.seed, RESAMPLE_STREAM);

    for iteration in 1..=cfg.max_iters {
        if tracker.evaluations + n as u64 > budget {
            break;
        }
        let step = advance(
            problem,
            fitness,
            cfg,
            ls,
            drift_kind,
            &ensemble,
            &evals,
            &mut particle_rngs,
            &mut resample_rng,
            &mut tracker,
        );
        let (next, next_evals, tau, resampled) = match step {
            Ok(v) => v,
            Err(err) if is_divergence(&err) => {
                let partial = tracker.finish(algorithm, problem, fitness, cfg, ensemble);
                return Err(Error::Divergence {
                    iteration,
                    reason: err.to_string(),
                    partial: Box::new(partial),
                });
            }
            Err(err) => return Err(err),
        };
        ensemble = next;
        evals = next_evals;
        tracker.push(iteration, &ensemble, &evals, tau, resampled, cfg);
    }
    Ok(tracker.finish(algorithm, problem, fitness, cfg, ensemble))
}

type Advanced = (Ensemble, Vec<Evaluation>, f64, bool);

#[allow(clippy::too_many_arguments)]
fn advance(
    problem: &dyn Potential,
    fitness: &FitnessSource,
    cfg: &RunConfig,
    ls: Option<&LeastSquaresProblem>,
    drift_kind: DriftKind,
    ensemble: &Ensemble,
    evals: &[Evaluation],
    particle_rngs: &mut [RngStream],
    resample_rng: &mut RngStream,
    tracker: &mut Tracker,
) -> Result<Advanced> {
    let n = ensemble.len();
    let d = ensemble.dim();
    let precond = match cfg.covariance {
        CovarianceMode::Identity => Preconditioner::Identity,
        CovarianceMode::WeightedCovariance => Preconditioner::from_ensemble(ensemble),
    };

    let drifts: Vec<DVector<f64>> = match drift_kind {
        DriftKind::None => vec![DVector::zeros(d); n],
        DriftKind::Exact => (0..n)
            .into_par_iter()
            .map(|i| exact_preconditioned_drift(ensemble, i, problem, &precond))
            .collect::<Result<_>>()?,
        DriftKind::DerivativeFree { prior } => {
            let ls = ls.expect("checked by caller");
            let g_values = forward_matrix(evals)?;
            let df = DerivativeFreeDrift::new(ensemble, &g_values, ls)?;
            let c = precond.matrix(d);
            (0..n)
                .into_par_iter()
                .map(|i| {
                    if prior {
                        df.drift(i, &c)
                    } else {
                        df.misfit_term(i)
                    }
                })
                .collect()
        }
    };

    let tau = if cfg.adaptive_step {
        adaptive_timestep(&DMatrix::from_columns(&drifts), cfg.tau)
    } else {
        cfg.tau
    };
    let inputs = StepInputs {
        precond: &precond,
        tau,
        sigma: cfg.sigma,
    };
    let noise_dim = precond.noise_dim(d);

    let moved: Vec<DVector<f64>> = particle_rngs
        .par_iter_mut()
        .enumerate()
        .map(|(i, rng)| {
            let noise = rng.standard_normal_vector(noise_dim);
            langevin_step(
                &ensemble.particle(i).into_owned(),
                &drifts[i],
                &inputs,
                &noise,
            )
        })
        .collect::<Result<_>>()?;

    let positions = DMatrix::from_columns(&moved);
    let mut next = Ensemble::new(positions, ensemble.weights().clone())?;
    let mut next_evals = evaluate_all(problem, &next)?;
    // Best-so-far sees every evaluated point, including ones resampling discards.
    tracker.observe(next.positions(), &next_evals);

    let fitness_values: Vec<f64> = if fitness.is_zero() {
        vec![0.0; n]
    } else {
        (0..n)
            .into_par_iter()
            .map(|i| fitness.evaluate(problem, &moved[i], &next_evals[i]))
            .collect::<Result<_>>()?
    };
    let weights = update_weights(ensemble.weights(), &DVector::from_vec(fitness_values), tau)?;

    let resampled = weight_ratio(&weights) > cfg.threshold;
    if resampled {
        let idx = resample_indices(&weights, resample_rng)?;
        let positions = DMatrix::from_fn(d, n, |r, c| moved[idx[c]][r]);
        next_evals = idx.iter().map(|&j| next_evals[j].clone()).collect();
        next.replace(positions, uniform_weights(n));
        return Ok((next, next_evals, tau, true));
    }
    next.set_weights(weights);
    Ok((next, next_evals, tau, false))
}
