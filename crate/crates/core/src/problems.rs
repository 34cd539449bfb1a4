//! Benchmark problems and their initial ensembles.

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::problem::{LeastSquaresProblem, ObjectiveProblem};
use crate::rng::{RngStream, INIT_STREAM};

/// Ackley parameters used for the high-dimensional escape benchmark.
pub const ACKLEY_DIM: usize = 100;
pub const ACKLEY_A: f64 = 20.0;
pub const ACKLEY_B: f64 = 0.2;
pub const ACKLEY_C: f64 = 2.0 * PI;

const RADIAL_SINGULARITY: f64 = 1e-12;

/// `V(x) = −a·exp(−b·√(Σx²/d)) − exp(Σcos(c·x)/d) + a + e`, with analytic gradient.
pub fn ackley(d: usize, a: f64, b: f64, c: f64) -> ObjectiveProblem {
    let value = move |x: &DVector<f64>| {
        let n = x.len() as f64;
        let r = (x.norm_squared() / n).sqrt();
        let cos_mean = x.iter().map(|&v| (c * v).cos()).sum::<f64>() / n;
        -a * (-b * r).exp() - cos_mean.exp() + a + E
    };
    let gradient = move |x: &DVector<f64>| {
        let n = x.len() as f64;
        let r = (x.norm_squared() / n).sqrt();
        let cos_mean = x.iter().map(|&v| (c * v).cos()).sum::<f64>() / n;
        let radial = if r < RADIAL_SINGULARITY {
            0.0
        } else {
            a * b * (-b * r).exp() / (n * r)
        };
        let oscillating = cos_mean.exp() * c / n;
        x.map(|v| radial * v + oscillating * (c * v).sin())
    };
    ObjectiveProblem::new(format!("ackley-{d}"), d, value).with_gradient(gradient)
}

pub fn ackley_default() -> ObjectiveProblem {
    ackley(ACKLEY_DIM, ACKLEY_A, ACKLEY_B, ACKLEY_C)
}

/// `V(x) = ½‖x‖²`.
pub fn quadratic(d: usize) -> ObjectiveProblem {
    ObjectiveProblem::new(format!("quadratic-{d}"), d, |x: &DVector<f64>| {
        0.5 * x.norm_squared()
    })
    .with_gradient(|x: &DVector<f64>| x.clone())
}

pub const ELLIPTIC_POINTS: [f64; 2] = [0.25, 0.75];
pub const ELLIPTIC_DATA: [f64; 2] = [27.5, 79.7];
pub const ELLIPTIC_OBS_STD: f64 = 0.1;
pub const ELLIPTIC_PRIOR_STD: f64 = 10.0;

/// Closed-form solution `f(u) = x₁u + exp(−x₂)(−u²/2 + u/2)` of the elliptic BVP.
pub fn elliptic_solution(x: &DVector<f64>, u: f64) -> f64 {
    x[0] * u + (-x[1]).exp() * (-u * u / 2.0 + u / 2.0)
}

/// Two point observations of the elliptic BVP solution.
pub fn elliptic_bvp_problem() -> LeastSquaresProblem {
    let forward = |x: &DVector<f64>| {
        DVector::from_iterator(2, ELLIPTIC_POINTS.iter().map(|&u| elliptic_solution(x, u)))
    };
    let jacobian = |x: &DVector<f64>| {
        let damp = (-x[1]).exp();
        DMatrix::from_fn(2, 2, |r, c| {
            let u = ELLIPTIC_POINTS[r];
            if c == 0 {
                u
            } else {
                -damp * (-u * u / 2.0 + u / 2.0)
            }
        })
    };
    LeastSquaresProblem::new(
        "elliptic",
        2,
        forward,
        DVector::from_column_slice(&ELLIPTIC_DATA),
        DMatrix::identity(2, 2) * ELLIPTIC_OBS_STD.powi(2),
        DMatrix::identity(2, 2) * ELLIPTIC_PRIOR_STD.powi(2),
    )
    .expect("constant covariances are positive definite")
    .with_jacobian(jacobian)
}

/// `G(x) = (10(x₂ − x₁²), …, 10(x_d − x_{d−1}²), x₁, …, x_{d−1})` with
/// `y = (0, …, 0, 1, …, 1)`, so `‖G(x) − y‖²` is the Rosenbrock function.
pub fn rosenbrock_map_problem(d: usize) -> Result<LeastSquaresProblem> {
    if d < 2 {
        return Err(Error::Config(format!(
            "rosenbrock map needs d >= 2, got {d}"
        )));
    }
    let m = d - 1;
    let forward = move |x: &DVector<f64>| {
        DVector::from_fn(2 * m, |i, _| {
            if i < m {
                10.0 * (x[i + 1] - x[i] * x[i])
            } else {
                x[i - m]
            }
        })
    };
    let jacobian = move |x: &DVector<f64>| {
        let mut j = DMatrix::zeros(2 * m, m + 1);
        for i in 0..m {
            j[(i, i)] = -20.0 * x[i];
            j[(i, i + 1)] = 10.0;
            j[(m + i, i)] = 1.0;
        }
        j
    };
    let data = DVector::from_fn(2 * m, |i, _| if i < m { 0.0 } else { 1.0 });
    Ok(LeastSquaresProblem::new(
        format!("rosenbrock-{d}"),
        d,
        forward,
        data,
        DMatrix::identity(2 * m, 2 * m) * 0.1f64.powi(2),
        DMatrix::identity(d, d) * 10f64.powi(2),
    )?
    .with_jacobian(jacobian))
}

/// `G(x) = Ax + b`; the Taylor expansion behind the derivative-free drift is exact here.
pub fn affine_oracle_problem(
    a: DMatrix<f64>,
    b: DVector<f64>,
    y: DVector<f64>,
    obs_cov: DMatrix<f64>,
    prior_cov: DMatrix<f64>,
) -> Result<LeastSquaresProblem> {
    let (k, d) = a.shape();
    if b.len() != k {
        return Err(Error::Shape(format!(
            "offset has length {}, expected {k}",
            b.len()
        )));
    }
    let map = a.clone();
    Ok(LeastSquaresProblem::new(
        "affine",
        d,
        move |x: &DVector<f64>| &map * x + &b,
        y,
        obs_cov,
        prior_cov,
    )?
    .with_jacobian(move |_| a.clone()))
}

/// One coordinate of an initial distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Marginal {
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
}

impl Marginal {
    fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            Self::Normal { mean, std } => mean + std * rng.standard_normal(),
            Self::Uniform { low, high } => low + (high - low) * rng.uniform(),
        }
    }
}

/// Product distribution used to draw initial ensembles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialDistribution {
    pub marginals: Vec<Marginal>,
}

impl InitialDistribution {
    pub fn iid(marginal: Marginal, d: usize) -> Self {
        Self {
            marginals: vec![marginal; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    /// Draws `n` particles from stream `INIT_STREAM` of `seed`, particle by particle.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Ensemble> {
        let mut rng = RngStream::new(seed, INIT_STREAM);
        let d = self.dim();
        let mut positions = DMatrix::zeros(d, n);
        for mut col in positions.column_iter_mut() {
            for (v, m) in col.iter_mut().zip(&self.marginals) {
                *v = m.sample(&mut rng);
            }
        }
        Ensemble::uniform(positions)
    }
}

/// `N(0, 30²)` in every coordinate.
pub fn ackley_initial(d: usize) -> InitialDistribution {
    InitialDistribution::iid(
        Marginal::Normal {
            mean: 0.0,
            std: 30.0,
        },
        d,
    )
}

/// `N(0, 1) × U(90, 110)`.
pub fn elliptic_initial() -> InitialDistribution {
    InitialDistribution {
        marginals: vec![
            Marginal::Normal {
                mean: 0.0,
                std: 1.0,
            },
            Marginal::Uniform {
                low: 90.0,
                high: 110.0,
            },
        ],
    }
}

/// `N(2, 0.3²)` in every coordinate.
pub fn rosenbrock_initial(d: usize) -> InitialDistribution {
    InitialDistribution::iid(
        Marginal::Normal {
            mean: 2.0,
            std: 0.3,
        },
        d,
    )
}
