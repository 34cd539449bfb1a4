use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::Serialize;

use super::OperatorMatrix;
use crate::error::{Error, Result};

const SCHUR_EPS: f64 = 1e-14;
const SCHUR_MAX_ITERS: usize = 10_000;
const INVERSE_ITERS: usize = 4;

/// `|Im λ| ≤ 1e-8 (1 + |Re λ|)` counts as real.
pub fn is_effectively_real(lambda: Complex64) -> bool {
    lambda.im.abs() <= 1e-8 * (1.0 + lambda.re.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenPair {
    pub eigenvalue: Complex64,
    /// Density-side eigenfunction (eigenvector of the transpose), L¹-normalized
    /// with positive mean.
    pub eigenfunction: DVector<f64>,
}

/// Eigenvalues of `op`, sorted by descending real part. Each complex-conjugate
/// pair appears once (positive imaginary part); real eigenvalues keep their
/// multiplicity.
pub fn leading_eigenvalues(op: &OperatorMatrix, count: usize) -> Result<Vec<Complex64>> {
    let m = op.matrix.nrows();
    if count > m {
        return Err(Error::Config(format!(
            "asked for {count} eigenvalues of a {m}x{m} operator"
        )));
    }
    let schur = Schur::try_new(op.matrix.clone(), SCHUR_EPS, SCHUR_MAX_ITERS)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let mut values: Vec<Complex64> = schur
        .complex_eigenvalues()
        .iter()
        .copied()
        .filter(|l| is_effectively_real(*l) || l.im > 0.0)
        .collect();
    if values
        .iter()
        .any(|l| !(l.re.is_finite() && l.im.is_finite()))
    {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    values.truncate(count);
    Ok(values)
}

/// Leading eigenvalues with their density-side eigenfunctions.
pub fn leading_eigenpairs(op: &OperatorMatrix, count: usize) -> Result<Vec<EigenPair>> {
    let values = leading_eigenvalues(op, count)?;
    let adjoint = op.matrix.transpose();
    values
        .into_iter()
        .map(|lambda| {
            let v = inverse_iteration(&adjoint, lambda)?;
            Ok(EigenPair {
                eigenvalue: lambda,
                eigenfunction: normalize_eigenfunction(&v),
            })
        })
        .collect()
}

fn inverse_iteration(a: &DMatrix<f64>, lambda: Complex64) -> Result<DVector<Complex64>> {
    let m = a.nrows();
    let shift = lambda + Complex64::new(1e-10 * (1.0 + lambda.norm()), 0.0);
    let shifted = DMatrix::from_fn(m, m, |r, c| {
        let v = Complex64::new(a[(r, c)], 0.0);
        if r == c {
            v - shift
        } else {
            v
        }
    });
    let lu = shifted.lu();
    // Deterministic start with components along every mode.
    let mut v = DVector::from_fn(m, |i, _| {
        Complex64::new(1.0 + 0.1 * ((i * 7 + 3) % 11) as f64, 0.0)
    });
    for _ in 0..INVERSE_ITERS {
        let next = lu
            .solve(&v)
            .ok_or_else(|| Error::Numerical("singular inverse-iteration system".into()))?;
        let norm = next.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Numerical("inverse iteration diverged".into()));
        }
        v = next / Complex64::new(norm, 0.0);
    }
    Ok(v)
}

/// Rotates `v` to be real, scales to `Σ|φ_m|/M = 1` and flips to a positive mean.
fn normalize_eigenfunction(v: &DVector<Complex64>) -> DVector<f64> {
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or_default();
    let phase = if pivot.norm() > 0.0 {
        pivot.conj() / pivot.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let real = v.map(|c| (c * phase).re);
    let l1 = real.iter().map(|x| x.abs()).sum::<f64>() / real.len() as f64;
    let mut out = if l1 > 0.0 { real / l1 } else { real };
    if out.sum() < 0.0 {
        out.neg_mut();
    }
    out
}
