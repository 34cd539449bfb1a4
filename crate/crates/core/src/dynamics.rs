//! Euler–Maruyama Langevin steps and ensemble drift approximations.

use nalgebra::{DMatrix, DVector};

use crate::ensemble::{weighted_covariance, weighted_mean, Covariance, Ensemble};
use crate::error::{Error, Result};
use crate::problem::{LeastSquaresProblem, Potential};

const ADAPTIVE_FLOOR: f64 = 1e-8;
const ADAPTIVE_MIN_FACTOR: f64 = 1e-6;
const ADAPTIVE_MAX_FACTOR: f64 = 10.0;

/// The preconditioner `C` together with the square-root factor used for noise.
#[derive(Clone, Debug, PartialEq)]
pub enum Preconditioner {
    Identity,
    Covariance(Covariance),
}

impl Preconditioner {
    pub fn from_ensemble(e: &Ensemble) -> Self {
        Self::Covariance(weighted_covariance(e))
    }

    /// `C v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Identity => v.clone(),
            Self::Covariance(c) => &c.matrix * v,
        }
    }

    /// Length of the Gaussian vector fed to [`langevin_step`] for a `dim`-dimensional state.
    pub fn noise_dim(&self, dim: usize) -> usize {
        match self {
            Self::Identity => dim,
            Self::Covariance(c) => c.factor.ncols(),
        }
    }

    pub fn matrix(&self, dim: usize) -> DMatrix<f64> {
        match self {
            Self::Identity => DMatrix::identity(dim, dim),
            Self::Covariance(c) => c.matrix.clone(),
        }
    }
}

/// Per-step integrator inputs.
#[derive(Clone, Copy, Debug)]
pub struct StepInputs<'a> {
    pub precond: &'a Preconditioner,
    pub tau: f64,
    pub sigma: f64,
}

/// One Euler–Maruyama step `x − τ·drift + √(τσ²)·factor·noise`.
///
/// `drift` must already be preconditioned (`C∇V`). With the identity
/// preconditioner `noise` is a `d`-vector; with the covariance it is an
/// `N`-vector multiplied by the `d × N` factor.
pub fn langevin_step(
    x: &DVector<f64>,
    drift: &DVector<f64>,
    s: &StepInputs<'_>,
    noise: &DVector<f64>,
) -> Result<DVector<f64>> {
    if drift.len() != x.len() {
        return Err(Error::Shape(format!(
            "drift has length {}, state {}",
            drift.len(),
            x.len()
        )));
    }
    let expected = s.precond.noise_dim(x.len());
    if noise.len() != expected {
        return Err(Error::Shape(format!(
            "noise has length {}, expected {expected}",
            noise.len()
        )));
    }
    let amplitude = (s.tau * s.sigma * s.sigma).sqrt();
    let mut next = x - drift * s.tau;
    if amplitude != 0.0 {
        match s.precond {
            Preconditioner::Identity => next.axpy(amplitude, noise, 1.0),
            Preconditioner::Covariance(c) => next.gemv(amplitude, &c.factor, noise, 1.0),
        }
    }
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteStep);
    }
    Ok(next)
}

/// `C ∇V(x_i)` using the problem's analytic gradient.
pub fn exact_preconditioned_drift(
    e: &Ensemble,
    i: usize,
    problem: &dyn Potential,
    precond: &Preconditioner,
) -> Result<DVector<f64>> {
    if !problem.has_gradient() {
        return Err(Error::Config(format!(
            "exact drift needs a gradient, {} has none",
            problem.name()
        )));
    }
    let grad = problem.gradient(&e.particle(i).into_owned())?;
    Ok(precond.apply(&grad))
}

/// Shared per-iteration quantities of the derivative-free drift.
///
/// Holds `Γ⁻¹ w_j (G(x_j) − Ḡ)` for every particle `j`, so the drift of each
/// particle costs one `N × k` product.
pub struct DerivativeFreeDrift<'a> {
    ensemble: &'a Ensemble,
    g_values: &'a DMatrix<f64>,
    problem: &'a LeastSquaresProblem,
    deviations: DMatrix<f64>,
    weighted_misfit_dirs: DMatrix<f64>,
}

impl<'a> DerivativeFreeDrift<'a> {
    /// `g_values` is `k × N`: column `j` is `G` applied to particle `j`.
    pub fn new(
        ensemble: &'a Ensemble,
        g_values: &'a DMatrix<f64>,
        problem: &'a LeastSquaresProblem,
    ) -> Result<Self> {
        let k = problem.data_dim();
        if g_values.nrows() != k || g_values.ncols() != ensemble.len() {
            return Err(Error::Shape(format!(
                "forward values are {}x{}, expected {k}x{}",
                g_values.nrows(),
                g_values.ncols(),
                ensemble.len()
            )));
        }
        let weights = ensemble.weights();
        let mut g_mean = DVector::zeros(k);
        for (g, &w) in g_values.column_iter().zip(weights.iter()) {
            g_mean.axpy(w, &g, 1.0);
        }
        let mut dirs = g_values.clone();
        for (mut col, &w) in dirs.column_iter_mut().zip(weights.iter()) {
            col -= &g_mean;
            col *= w;
        }
        let weighted_misfit_dirs = problem_obs_solve(problem, &dirs);

        // Σ_j w_j (G_j − Ḡ) = 0, so x_j may be centred without changing the sum;
        // centring avoids cancellation when the ensemble sits far from the origin.
        let mean = weighted_mean(ensemble);
        let mut deviations = ensemble.positions().clone();
        for mut col in deviations.column_iter_mut() {
            col -= &mean;
        }
        Ok(Self {
            ensemble,
            g_values,
            problem,
            deviations,
            weighted_misfit_dirs,
        })
    }

    /// The misfit part `Σ_j w_j ⟨G(x_j) − Ḡ, G(x_i) − y⟩_Γ x_j`.
    pub fn misfit_term(&self, i: usize) -> DVector<f64> {
        let residual = self.g_values.column(i) - self.problem.data();
        let coeffs = self.weighted_misfit_dirs.tr_mul(&residual);
        &self.deviations * coeffs
    }

    /// Misfit term plus the prior term `C Γ₀⁻¹ x_i`.
    pub fn drift(&self, i: usize, c: &DMatrix<f64>) -> DVector<f64> {
        let x = self.ensemble.particle(i).into_owned();
        self.misfit_term(i) + c * self.problem.apply_prior_inverse(&x)
    }
}

fn problem_obs_solve(problem: &LeastSquaresProblem, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (j, col) in m.column_iter().enumerate() {
        out.set_column(j, &problem.apply_obs_inverse(&col.into_owned()));
    }
    out
}

/// Derivative-free approximation of `C ∇V(x_i)` for a least-squares potential.
pub fn derivative_free_drift(
    e: &Ensemble,
    g_values: &DMatrix<f64>,
    i: usize,
    problem: &LeastSquaresProblem,
    c: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    Ok(DerivativeFreeDrift::new(e, g_values, problem)?.drift(i, c))
}

/// Normalized-step rule `τ₀ / (‖D‖_F/√N + 1e-8)`, clamped to `[1e-6·τ₀, 10·τ₀]`.
///
/// `drifts` holds one particle drift per column.
pub fn adaptive_timestep(drifts: &DMatrix<f64>, tau0: f64) -> f64 {
    let n = drifts.ncols().max(1) as f64;
    let scale = drifts.norm() / n.sqrt() + ADAPTIVE_FLOOR;
    (tau0 / scale).clamp(ADAPTIVE_MIN_FACTOR * tau0, ADAPTIVE_MAX_FACTOR * tau0)
}
