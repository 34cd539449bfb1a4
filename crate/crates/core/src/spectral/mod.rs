//! Fourier pseudospectral discretization of the periodic 1-d operators
//!
//! * `ℒf = −V′f′ + f″` and `ℒ − εV`,
//! * `(𝒟_σ + W)f = (σ²/2)f″ + Wf`,
//!
//! on `[0, 1)`, plus the eigen-diagnostics built on them: spectral gaps of
//! `ℒ − εV` and concentration of the principal eigenfunction of `𝒟_σ + W`.
//!
//! Eigenfunctions are reported on the density side, i.e. as eigenvectors of the
//! transposed matrix. For `ℒ` this is the Fokker–Planck picture in which the
//! principal eigenfunction at `ε = 0` is the Gibbs density `∝ e^{−V}`; the
//! right eigenvector would be constant. `𝒟_σ + W` is symmetric, so both sides agree.

mod eigen;
mod fourier;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub use eigen::{is_effectively_real, leading_eigenpairs, leading_eigenvalues, EigenPair};
pub use fourier::SpectralDifferentiator;

pub const DEFAULT_GRID_POINTS: usize = 256;
pub const DEFAULT_BLEND_WIDTH: f64 = 0.02;
/// Interval over which concentration of `μ_σ` is measured.
pub const CONCENTRATION_INTERVAL: (f64, f64) = (0.44, 0.68);

/// Nodes `x_m = m/M`, `m = 0..M`, on the periodic unit interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PeriodicGrid {
    m: usize,
}

impl PeriodicGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 16 || !m.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "grid size must be even and at least 16, got {m}"
            )));
        }
        Ok(Self { m })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m).map(|i| i as f64 / self.m as f64).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes().into_iter().map(f).collect()
    }
}

/// `cos 9πx − cos 11πx`, the double-well test potential (not periodic on `[0, 1)`).
pub fn double_well(x: f64) -> f64 {
    use std::f64::consts::PI;
    (9.0 * PI * x).cos() - (11.0 * PI * x).cos()
}

fn bump_h(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// C^∞ step from 0 at `t ≤ 0` to 1 at `t ≥ 1`.
fn smoothstep(t: f64) -> f64 {
    let a = bump_h(t);
    let b = bump_h(1.0 - t);
    a / (a + b)
}

/// Blend factor `s(x)`: 0 at the seam, 1 on `[b, 1 − b]`.
pub fn seam_blend(x: f64, blend_width: f64) -> f64 {
    if x < blend_width {
        smoothstep(x / blend_width)
    } else if x > 1.0 - blend_width {
        smoothstep((1.0 - x) / blend_width)
    } else {
        1.0
    }
}

/// Samples of `Ṽ = s·V + (1 − s)·V(0)`, a periodic version of `v_raw`.
pub fn smooth_periodize(
    v_raw: impl Fn(f64) -> f64,
    grid: &PeriodicGrid,
    blend_width: f64,
) -> Result<Vec<f64>> {
    if !(blend_width > 0.0 && blend_width < 0.1) {
        return Err(Error::Config(format!(
            "blend width must lie in (0, 0.1), got {blend_width}"
        )));
    }
    let v0 = v_raw(0.0);
    Ok(grid.sample(|x| {
        let s = seam_blend(x, blend_width);
        if s == 1.0 {
            v_raw(x)
        } else {
            // Same as s·V + (1 − s)·V(0), but exact for constant V.
            v0 + s * (v_raw(x) - v0)
        }
    }))
}

/// Which operator a matrix discretizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperatorKind {
    /// `ℒ − εV`.
    Langevin { epsilon: f64 },
    /// `𝒟_σ + W`.
    DiffusionSource { sigma: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: DMatrix<f64>,
    pub kind: OperatorKind,
    pub grid: PeriodicGrid,
}

fn check_samples(samples: &[f64]) -> Result<PeriodicGrid> {
    let grid = PeriodicGrid::new(samples.len())?;
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("operator coefficients must be finite".into()));
    }
    Ok(grid)
}

/// Matrix of `f ↦ −V′⊙f′ + f″ − εV⊙f`.
pub fn assemble_langevin_operator(v: &[f64], epsilon: f64) -> Result<OperatorMatrix> {
    let grid = check_samples(v)?;
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::Config(format!(
            "epsilon must be nonnegative, got {epsilon}"
        )));
    }
    let diff = SpectralDifferentiator::new(&grid);
    let dv = diff.first(v);
    let d1 = diff.first_matrix();
    let mut matrix = diff.second_matrix();
    for r in 0..grid.len() {
        for c in 0..grid.len() {
            matrix[(r, c)] -= dv[r] * d1[(r, c)];
        }
        matrix[(r, r)] -= epsilon * v[r];
    }
    Ok(OperatorMatrix {
        matrix,
        kind: OperatorKind::Langevin { epsilon },
        grid,
    })
}

/// Matrix of `f ↦ (σ²/2)f″ + W⊙f`.
pub fn assemble_diffusion_source_operator(w: &[f64], sigma: f64) -> Result<OperatorMatrix> {
    let grid = check_samples(w)?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Config(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let diff = SpectralDifferentiator::new(&grid);
    let mut matrix = diff.second_matrix() * (0.5 * sigma * sigma);
    for r in 0..grid.len() {
        matrix[(r, r)] += w[r];
    }
    Ok(OperatorMatrix {
        matrix,
        kind: OperatorKind::DiffusionSource { sigma },
        grid,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub param: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub gap: f64,
}

/// `(ε, λ₀, λ₁, λ₀ − λ₁)` of `ℒ − εV` for each `ε`, in input order.
pub fn spectral_gap_curve(v: &[f64], epsilons: &[f64]) -> Result<Vec<GapRow>> {
    if epsilons.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("epsilon list must be ascending".into()));
    }
    epsilons
        .par_iter()
        .map(|&eps| {
            let op = assemble_langevin_operator(v, eps)?;
            let l = leading_eigenvalues(&op, 2)?;
            Ok(GapRow {
                param: eps,
                lambda0: l[0].re,
                lambda1: l[1].re,
                gap: l[0].re - l[1].re,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub sigma: f64,
    pub lambda0: f64,
    /// Mass of `μ_σ` over the measured interval.
    pub ratio: f64,
    pub eigenfunction: DVector<f64>,
}

/// Principal eigenpair of `𝒟_σ + W` and its mass on `interval`, per `σ`.
pub fn concentration_curve(
    w: &[f64],
    sigmas: &[f64],
    interval: (f64, f64),
) -> Result<Vec<ConcentrationRow>> {
    sigmas
        .par_iter()
        .map(|&sigma| {
            let op = assemble_diffusion_source_operator(w, sigma)?;
            let pair = leading_eigenpairs(&op, 1)?.remove(0);
            let ratio = mass_concentration(pair.eigenfunction.as_slice(), interval)?;
            Ok(ConcentrationRow {
                sigma,
                lambda0: pair.eigenvalue.re,
                ratio,
                eigenfunction: pair.eigenfunction,
            })
        })
        .collect()
}

/// Integral over `[lo, hi]` of the periodic piecewise-linear interpolant of
/// `f`, divided by its integral over the whole period.
pub fn mass_concentration(f: &[f64], (lo, hi): (f64, f64)) -> Result<f64> {
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::Config(format!(
            "interval [{lo}, {hi}] must satisfy 0 <= lo < hi <= 1"
        )));
    }
    let m = f.len();
    if m == 0 {
        return Err(Error::Config("empty eigenfunction".into()));
    }
    let total: f64 = f.iter().sum::<f64>() / m as f64;
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Numerical(format!(
            "eigenfunction has total mass {total}"
        )));
    }
    Ok((primitive(f, hi) - primitive(f, lo)) / total)
}

/// `∫₀^x` of the interpolant.
fn primitive(f: &[f64], x: f64) -> f64 {
    let m = f.len();
    let h = 1.0 / m as f64;
    let pos = x * m as f64;
    let cell = (pos.floor() as usize).min(m);
    let mut acc: f64 = (0..cell).map(|i| 0.5 * h * (f[i] + f[(i + 1) % m])).sum();
    if cell < m {
        let t = pos - cell as f64;
        let (a, b) = (f[cell], f[(cell + 1) % m]);
        acc += h * (a * t + 0.5 * (b - a) * t * t);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_validation() {
        assert!(PeriodicGrid::new(8).is_err());
        assert!(PeriodicGrid::new(17).is_err());
        assert_eq!(PeriodicGrid::new(16).unwrap().nodes()[4], 0.25);
    }

    #[test]
    fn differentiates_fourier_modes() {
        let grid = PeriodicGrid::new(64).unwrap();
        let diff = SpectralDifferentiator::new(&grid);
        for k in 1..16 {
            let w = 2.0 * PI * k as f64;
            let f = grid.sample(|x| (w * x).sin());
            let d1 = diff.first(&f);
            let d2 = diff.second(&f);
            for (i, x) in grid.nodes().into_iter().enumerate() {
                assert!((d1[i] - w * (w * x).cos()).abs() < 1e-10 * w);
                assert!((d2[i] + w * w * (w * x).sin()).abs() < 1e-10 * w * w);
            }
        }
    }

    #[test]
    fn nyquist_mode_conventions() {
        let grid = PeriodicGrid::new(16).unwrap();
        let diff = SpectralDifferentiator::new(&grid);
        let f: Vec<f64> = (0..16)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        assert!(diff.first(&f).iter().all(|v| v.abs() < 1e-10));
        let expect = -(PI * 16.0).powi(2);
        for (v, s) in diff.second(&f).iter().zip(&f) {
            assert!((v - expect * s).abs() < 1e-9 * expect.abs());
        }
    }

    #[test]
    fn periodize_constant_and_seam() {
        let grid = PeriodicGrid::new(256).unwrap();
        let c = smooth_periodize(|_| 2.5, &grid, 0.02).unwrap();
        assert!(c.iter().all(|&v| v == 2.5));
        let b = 0.02;
        let seam_left = {
            let s = seam_blend(0.0, b);
            s * double_well(0.0) + (1.0 - s) * double_well(0.0)
        };
        let x = 1.0 - 1e-15;
        let s = seam_blend(x, b);
        let seam_right = s * double_well(x) + (1.0 - s) * double_well(0.0);
        assert!((seam_left - seam_right).abs() < 1e-12);
    }

    #[test]
    fn periodize_only_touches_blend_zones() {
        let grid = PeriodicGrid::new(128).unwrap();
        let raw = |x: f64| (2.0 * PI * x).cos();
        let out = smooth_periodize(raw, &grid, 0.05).unwrap();
        let max_dev = grid
            .nodes()
            .iter()
            .map(|&x| (raw(x) - raw(0.0)).abs())
            .fold(0.0, f64::max);
        for (x, v) in grid.nodes().into_iter().zip(out) {
            if (0.05..=0.95).contains(&x) {
                assert_eq!(v, raw(x));
            } else {
                assert!((v - raw(x)).abs() <= max_dev + 1e-15);
            }
        }
    }

    #[test]
    fn mass_of_uniform_function() {
        let f = vec![1.0; 256];
        assert!((mass_concentration(&f, (0.44, 0.68)).unwrap() - 0.24).abs() < 1e-13);
        assert!((mass_concentration(&f, (0.0, 1.0)).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn mass_of_hat_is_exact() {
        // Piecewise-linear hat: its interpolant is itself, so the integral is exact.
        let m = 32;
        let f: Vec<f64> = (0..m).map(|i| if i == 8 { 1.0 } else { 0.0 }).collect();
        let half_hat = mass_concentration(&f, (0.0, 0.25)).unwrap();
        assert!((half_hat - 0.5).abs() < 1e-14);
    }
}
