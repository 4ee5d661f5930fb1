//! Hypotheses, training, ensembles and empirical metrics.

pub mod data;
pub mod ensemble;
pub mod estimators;
pub mod finite;
pub mod linear;

pub use data::{Dataset, Example, SparseVector};
pub use ensemble::{partition_indices, split_disjoint, train_ensemble, train_voting_student, Ensemble};
pub use estimators::{
    estimate_expected_margin, estimate_high_margin_nu, estimate_infinite_ensemble,
    margin_distribution_report, margin_histogram, HistogramBin, LearningProblem, MarginRecord,
};
pub use finite::{
    erm_among, erm_finite, erm_threshold, FiniteHypothesisClass, FiniteMember, HypothesisClass,
    Threshold, ThresholdClass, TieBreak,
};
pub use linear::{train_erm, LinearHypothesis, TrainerConfig};

use crate::error::{param_err, Result};

/// A binary classifier over inputs of type `X`.
pub trait Predictor<X: ?Sized> {
    fn predict(&self, x: &X) -> u8;
}

impl<X: ?Sized, P: Predictor<X> + ?Sized> Predictor<X> for &P {
    fn predict(&self, x: &X) -> u8 {
        (**self).predict(x)
    }
}

/// Fraction of labeled examples `h` gets wrong.
pub fn empirical_error<H: Predictor<Example> + ?Sized>(h: &H, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return param_err("empirical error of an empty dataset");
    }
    let mut wrong = 0usize;
    for e in data {
        let Some(y) = e.label else {
            return param_err("empirical error needs labeled data");
        };
        wrong += usize::from(h.predict(e) != y);
    }
    Ok(wrong as f64 / data.len() as f64)
}

/// Fraction of examples on which `h1` and `h2` disagree.
pub fn empirical_disagreement<A, B>(h1: &A, h2: &B, data: &Dataset) -> Result<f64>
where
    A: Predictor<Example> + ?Sized,
    B: Predictor<Example> + ?Sized,
{
    if data.is_empty() {
        return param_err("empirical disagreement over an empty dataset");
    }
    let differ = data.iter().filter(|e| h1.predict(e) != h2.predict(e)).count();
    Ok(differ as f64 / data.len() as f64)
}

pub fn accuracy<H: Predictor<Example> + ?Sized>(h: &H, data: &Dataset) -> Result<f64> {
    empirical_error(h, data).map(|e| 1.0 - e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_data(n: usize, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        Dataset::new(
            (0..n)
                .map(|_| {
                    let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                    Example::labeled(SparseVector::from_dense(&x), rng.random_range(0..2))
                })
                .collect(),
        )
    }

    fn random_hyp(rng: &mut impl Rng) -> LinearHypothesis {
        LinearHypothesis {
            weights: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            bias: rng.random_range(-0.5..0.5),
        }
    }

    #[test]
    fn disagreement_with_self_and_complement() {
        let data = random_data(100, 1);
        let h = random_hyp(&mut rng_from_seed(2));
        assert_eq!(empirical_disagreement(&h, &h, &data).unwrap(), 0.0);
        // Random continuous data never lands exactly on the boundary.
        assert_eq!(empirical_disagreement(&h, &h.negated(), &data).unwrap(), 1.0);
    }

    #[test]
    fn metrics_reject_empty_data() {
        let h = LinearHypothesis::zeros(2);
        assert!(empirical_error(&h, &Dataset::default()).is_err());
        assert!(empirical_disagreement(&h, &h, &Dataset::default()).is_err());
    }

    proptest! {
        #[test]
        fn zero_one_triangle_inequality(seed: u64, n in 1usize..60) {
            let data = random_data(n, seed);
            let mut rng = rng_from_seed(seed ^ 0xABCD);
            let h1 = random_hyp(&mut rng);
            let h2 = random_hyp(&mut rng);
            let lhs = empirical_error(&h1, &data).unwrap();
            let rhs = empirical_error(&h2, &data).unwrap() + empirical_disagreement(&h1, &h2, &data).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn prediction_is_scale_invariant(seed: u64, c in 1e-3f64..1e3) {
            let data = random_data(30, seed);
            let h = random_hyp(&mut rng_from_seed(seed));
            let hs = h.scaled(c);
            for e in &data {
                prop_assert_eq!(h.predict(e), hs.predict(e));
            }
        }
    }
}
