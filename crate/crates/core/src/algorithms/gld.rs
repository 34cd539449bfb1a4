use nalgebra::{DMatrix, DVector};

use super::{IterationStats, RunRecord};
use crate::config::{CovarianceMode, DriftMode, RunConfig};
use crate::dynamics::{adaptive_timestep, langevin_step, Preconditioner, StepInputs};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::problem::Potential;
use crate::rng::RngStream;

/// Gradient Langevin dynamics: one chain `x ← x − τ∇V(x) + √(τσ²) ξ`.
///
/// `cfg.particles`, `cfg.threshold` and `cfg.covariance` are ignored. The chain
/// draws from particle stream 0, so it coincides with particle 0 of an
/// unweighted identity-preconditioned ensemble run with the same seed.
pub fn run_gld(
    problem: &dyn Potential,
    cfg: &RunConfig,
    start: &DVector<f64>,
) -> Result<RunRecord> {
    run_gld_chain(problem, cfg, start, 0)
}

/// [`run_gld`] on the noise stream of ensemble particle `particle_index`.
pub fn run_gld_chain(
    problem: &dyn Potential,
    cfg: &RunConfig,
    start: &DVector<f64>,
    particle_index: usize,
) -> Result<RunRecord> {
    cfg.validate()?;
    if !problem.has_gradient() {
        return Err(Error::Config(format!(
            "GLD needs a gradient, {} has none",
            problem.name()
        )));
    }
    if start.len() != problem.dim() {
        return Err(Error::Shape(format!(
            "start has length {}, problem dimension is {}",
            start.len(),
            problem.dim()
        )));
    }
    let cfg = RunConfig {
        particles: 1,
        covariance: CovarianceMode::Identity,
        drift: DriftMode::ExactGradient,
        threshold: f64::INFINITY,
        ..cfg.clone()
    };
    let budget = cfg.max_evals.unwrap_or(u64::MAX);
    let mut rng = RngStream::particle(cfg.seed, particle_index);
    let precond = Preconditioner::Identity;

    let mut x = start.clone();
    let mut iterations = Vec::new();
    let mut snapshots = Vec::new();
    let mut best = f64::INFINITY;
    let mut best_point = None;
    let mut evaluations = 0u64;

    let mut record = |iteration: usize, x: &DVector<f64>, v: f64, tau: f64, evaluations: u64| {
        if v < best {
            best = v;
            best_point = Some(x.clone());
        }
        iterations.push(IterationStats {
            iteration,
            mean_potential: v,
            best_potential: best,
            evaluations,
            tau,
            resampled: false,
        });
        if cfg.snapshot_iters.contains(&iteration) {
            let e = Ensemble::from_particles(std::slice::from_ref(x)).expect("finite state");
            snapshots.push((iteration, e));
        }
    };

    let partial =
        |iterations: Vec<IterationStats>, snapshots, best_point, x: &DVector<f64>| RunRecord {
            algorithm: "gld".into(),
            problem: problem.name().to_string(),
            fitness: "Zero".into(),
            config: cfg.clone(),
            iterations,
            final_ensemble: Ensemble::from_particles(std::slice::from_ref(x))
                .expect("finite state"),
            snapshots,
            best_point,
        };

    if budget >= 1 {
        let v = problem.value(&x)?;
        evaluations += 1;
        record(0, &x, v, 0.0, evaluations);

        for iteration in 1..=cfg.max_iters {
            if evaluations + 1 > budget {
                break;
            }
            let step = (|| -> Result<(DVector<f64>, f64, f64)> {
                let grad = problem.gradient(&x)?;
                let tau = if cfg.adaptive_step {
                    adaptive_timestep(
                        &DMatrix::from_column_slice(grad.len(), 1, grad.as_slice()),
                        cfg.tau,
                    )
                } else {
                    cfg.tau
                };
                let inputs = StepInputs {
                    precond: &precond,
                    tau,
                    sigma: cfg.sigma,
                };
                let noise = rng.standard_normal_vector(x.len());
                let next = langevin_step(&x, &grad, &inputs, &noise)?;
                let v = problem.value(&next)?;
                Ok((next, v, tau))
            })();
            match step {
                Ok((next, v, tau)) => {
                    x = next;
                    evaluations += 1;
                    record(iteration, &x, v, tau, evaluations);
                }
                Err(err @ (Error::NonFiniteStep | Error::Evaluation(_))) => {
                    return Err(Error::Divergence {
                        iteration,
                        reason: err.to_string(),
                        partial: Box::new(partial(iterations, snapshots, best_point, &x)),
                    });
                }
                Err(err) => return Err(err),
            }
        }
    }
    Ok(partial(iterations, snapshots, best_point, &x))
}
