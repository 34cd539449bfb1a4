//! Weighted particle ensembles and their first two moments.

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::Serialize;

use crate::error::{Error, Result};

/// `N` weighted particles in `R^d`.
///
/// Positions are stored column-major as a `d × N` matrix, one column per
/// particle. Weights form a probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ensemble {
    positions: DMatrix<f64>,
    weights: DVector<f64>,
}

/// Tolerance on `Σ w = 1`, growing with the rounding of an `n`-term sum.
pub(crate) fn simplex_tolerance(n: usize) -> f64 {
    1e-12 + n as f64 * f64::EPSILON
}

pub(crate) fn check_simplex(weights: &DVector<f64>) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Config(
            "weights must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > simplex_tolerance(weights.len()) {
        return Err(Error::Config(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

impl Ensemble {
    /// Builds an ensemble from a `d × N` position matrix and simplex weights.
    pub fn new(positions: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        if positions.nrows() == 0 || positions.ncols() == 0 {
            return Err(Error::Shape("ensemble needs N >= 1 and d >= 1".into()));
        }
        if weights.len() != positions.ncols() {
            return Err(Error::Shape(format!(
                "{} weights for {} particles",
                weights.len(),
                positions.ncols()
            )));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("particle positions must be finite".into()));
        }
        check_simplex(&weights)?;
        Ok(Self { positions, weights })
    }

    /// Equal weights `1/N` on every particle.
    pub fn uniform(positions: DMatrix<f64>) -> Result<Self> {
        let n = positions.ncols();
        Self::new(positions, uniform_weights(n))
    }

    /// Builds an ensemble from a list of particles with uniform weights.
    pub fn from_particles(particles: &[DVector<f64>]) -> Result<Self> {
        let Some(first) = particles.first() else {
            return Err(Error::Shape("ensemble needs N >= 1".into()));
        };
        let d = first.len();
        if particles.iter().any(|p| p.len() != d) {
            return Err(Error::Shape("particles have different dimensions".into()));
        }
        Self::uniform(DMatrix::from_fn(d, particles.len(), |r, c| particles[c][r]))
    }

    pub fn len(&self) -> usize {
        self.positions.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.positions.nrows()
    }

    pub fn positions(&self) -> &DMatrix<f64> {
        &self.positions
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn particle(&self, i: usize) -> DVectorView<'_, f64> {
        self.positions.column(i)
    }

    pub fn particles(&self) -> impl Iterator<Item = DVectorView<'_, f64>> {
        self.positions.column_iter()
    }

    pub(crate) fn replace(&mut self, positions: DMatrix<f64>, weights: DVector<f64>) {
        debug_assert_eq!(positions.shape(), self.positions.shape());
        debug_assert_eq!(weights.len(), self.weights.len());
        self.positions = positions;
        self.weights = weights;
    }

    pub(crate) fn set_weights(&mut self, weights: DVector<f64>) {
        debug_assert_eq!(weights.len(), self.weights.len());
        self.weights = weights;
    }
}

pub(crate) fn uniform_weights(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0 / n as f64)
}

/// Weighted ensemble covariance `C = Σ w_i (x_i − x̄)(x_i − x̄)ᵀ` with its
/// square-root factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Covariance {
    pub matrix: DMatrix<f64>,
    /// `d × N` matrix with columns `√w_i (x_i − x̄)`; `factor · factorᵀ = matrix`.
    pub factor: DMatrix<f64>,
}

/// `Σ_i w_i x_i`, summed in particle order.
pub fn weighted_mean(e: &Ensemble) -> DVector<f64> {
    let mut mean = DVector::zeros(e.dim());
    for (x, &w) in e.particles().zip(e.weights.iter()) {
        mean.axpy(w, &x, 1.0);
    }
    mean
}

pub fn weighted_covariance(e: &Ensemble) -> Covariance {
    let mean = weighted_mean(e);
    let mut factor = e.positions.clone();
    for (mut col, &w) in factor.column_iter_mut().zip(e.weights.iter()) {
        col -= &mean;
        col *= w.sqrt();
    }
    let matrix = &factor * factor.transpose();
    Covariance { matrix, factor }
}
