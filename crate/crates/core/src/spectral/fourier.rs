use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::PeriodicGrid;

/// Fourier differentiation on a periodic grid over `[0, 1)`.
///
/// The first derivative drops the Nyquist mode (its symbol `iπM` has no
/// real-valued counterpart); the second derivative keeps it with symbol `−(πM)²`.
#[derive(Clone)]
pub struct SpectralDifferentiator {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralDifferentiator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralDifferentiator")
            .field("m", &self.m)
            .finish()
    }
}

impl SpectralDifferentiator {
    pub fn new(grid: &PeriodicGrid) -> Self {
        let m = grid.len();
        let mut planner = FftPlanner::new();
        Self {
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    fn wavenumber(&self, k: usize) -> f64 {
        if k <= self.m / 2 {
            k as f64
        } else {
            k as f64 - self.m as f64
        }
    }

    fn apply(&self, f: &[f64], symbol: impl Fn(usize, f64) -> Complex64) -> Vec<f64> {
        assert_eq!(f.len(), self.m, "sample count must match the grid");
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            *c *= symbol(k, self.wavenumber(k));
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.m as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    pub fn first(&self, f: &[f64]) -> Vec<f64> {
        let nyquist = self.m / 2;
        self.apply(f, |k, kk| {
            if k == nyquist {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, 2.0 * std::f64::consts::PI * kk)
            }
        })
    }

    pub fn second(&self, f: &[f64]) -> Vec<f64> {
        self.apply(f, |_, kk| {
            let w = 2.0 * std::f64::consts::PI * kk;
            Complex64::new(-w * w, 0.0)
        })
    }

    /// Matrix of [`Self::first`], column `j` being the derivative of the `j`-th unit vector.
    pub fn first_matrix(&self) -> DMatrix<f64> {
        self.matrix_of(|f| self.first(f))
    }

    pub fn second_matrix(&self) -> DMatrix<f64> {
        self.matrix_of(|f| self.second(f))
    }

    fn matrix_of(&self, op: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.m, self.m);
        let mut e = vec![0.0; self.m];
        for j in 0..self.m {
            e[j] = 1.0;
            out.set_column(j, &nalgebra::DVector::from_vec(op(&e)));
            e[j] = 0.0;
        }
        out
    }
}
