//! Feynman–Kac reweighting and multinomial resampling.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::ensemble::{uniform_weights, Ensemble};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// `w_i e^{τ W_i} / Σ_j w_j e^{τ W_j}`, evaluated as `e^{τ(W_i − max W)}`.
///
/// A constant fitness leaves the weights bit-for-bit unchanged.
pub fn update_weights(w: &DVector<f64>, fitness: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
    if w.len() != fitness.len() {
        return Err(Error::Shape(format!(
            "{} weights, {} fitness values",
            w.len(),
            fitness.len()
        )));
    }
    if fitness.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("non-finite fitness value".into()));
    }
    let max = fitness.max();
    let factors = fitness.map(|v| (tau * (v - max)).exp());
    if factors.iter().all(|&f| f == 1.0) {
        return Ok(w.clone());
    }
    let numer = w.component_mul(&factors);
    let total = numer.sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::WeightCollapse);
    }
    Ok(numer / total)
}

/// `max w / min w`; `+∞` as soon as any weight is zero.
pub fn weight_ratio(w: &DVector<f64>) -> f64 {
    let min = w.min();
    if min <= 0.0 {
        return f64::INFINITY;
    }
    w.max() / min
}

/// Draws `N` indices i.i.d. from the categorical distribution `w`.
pub fn resample_indices(w: &DVector<f64>, rng: &mut RngStream) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(w.iter().copied())
        .map_err(|e| Error::Numerical(format!("invalid resampling weights: {e}")))?;
    Ok((0..w.len()).map(|_| dist.sample(rng)).collect())
}

/// Replaces the ensemble by `N` i.i.d. draws from its weighted empirical
/// measure; the returned weights are uniform.
pub fn multinomial_resample(e: &Ensemble, rng: &mut RngStream) -> Result<Ensemble> {
    let idx = resample_indices(e.weights(), rng)?;
    let positions = DMatrix::from_fn(e.dim(), e.len(), |r, c| e.positions()[(r, idx[c])]);
    Ensemble::new(positions, uniform_weights(e.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_fitness_is_identity() {
        let w = DVector::from_vec(vec![0.2, 0.3, 0.5]);
        let out = update_weights(&w, &DVector::from_element(3, -7.25), 0.9).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn log_three_gives_quarter_three_quarters() {
        let w = DVector::from_vec(vec![0.5, 0.5]);
        let out = update_weights(&w, &DVector::from_vec(vec![0.0, 3f64.ln()]), 1.0).unwrap();
        assert!((out[0] - 0.25).abs() < 1e-15);
        assert!((out[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn matches_direct_formula() {
        let mut rng = RngStream::new(8, 8);
        let raw = DVector::from_fn(6, |_, _| rng.uniform() + 0.1);
        let w = &raw / raw.sum();
        let fit = DVector::from_fn(6, |_, _| rng.standard_normal());
        let tau = 0.7;
        let denom: f64 = (0..6).map(|j| w[j] * (tau * fit[j]).exp()).sum();
        let out = update_weights(&w, &fit, tau).unwrap();
        for i in 0..6 {
            assert!((out[i] - w[i] * (tau * fit[i]).exp() / denom).abs() < 1e-14);
        }
    }

    #[test]
    fn extreme_fitness_does_not_overflow() {
        let w = DVector::from_vec(vec![0.5, 0.5]);
        let out = update_weights(&w, &DVector::from_vec(vec![1e6, 1e6 - 1.0]), 1.0).unwrap();
        assert!((out.sum() - 1.0).abs() < 1e-15);
        assert!(out[0] > out[1]);
    }

    #[test]
    fn collapse_is_reported() {
        let w = DVector::from_vec(vec![0.0, 1.0]);
        let err = update_weights(&w, &DVector::from_vec(vec![0.0, -1e6]), 1.0).unwrap_err();
        assert!(matches!(err, Error::WeightCollapse));
    }

    #[test]
    fn ratio_cases() {
        assert_eq!(weight_ratio(&DVector::from_element(4, 0.25)), 1.0);
        assert!((weight_ratio(&DVector::from_vec(vec![0.9, 0.1])) - 9.0).abs() < 1e-12);
        assert_eq!(
            weight_ratio(&DVector::from_vec(vec![0.5, 0.5, 0.0])),
            f64::INFINITY
        );
    }

    #[test]
    fn degenerate_weights_copy_one_particle() {
        let pos = DMatrix::from_column_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let e = Ensemble::new(pos, DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0])).unwrap();
        let out = multinomial_resample(&e, &mut RngStream::new(0, 0)).unwrap();
        assert!(out.positions().iter().all(|&v| v == 1.0));
        assert!(out.weights().iter().all(|&w| w == 0.25));
    }

    #[test]
    fn single_particle_is_identity() {
        let e = Ensemble::uniform(DMatrix::from_column_slice(2, 1, &[3.0, 4.0])).unwrap();
        let out = multinomial_resample(&e, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(out, e);
    }

    #[test]
    fn copy_counts_follow_binomial_statistics() {
        let w = DVector::from_vec(vec![0.7, 0.3]);
        let mut rng = RngStream::new(99, 0);
        let trials = 100_000;
        let mut copies_of_first = 0usize;
        for _ in 0..trials {
            copies_of_first += resample_indices(&w, &mut rng)
                .unwrap()
                .iter()
                .filter(|&&i| i == 0)
                .count();
        }
        // Each trial draws N = 2 particles; the total count is Binomial(2·trials, 0.7).
        let draws = 2.0 * trials as f64;
        let mean = copies_of_first as f64 / trials as f64;
        let se = (draws * 0.7 * 0.3).sqrt() / trials as f64;
        assert!((mean - 1.4).abs() < 3.0 * se, "mean copies {mean}, se {se}");
    }
}
