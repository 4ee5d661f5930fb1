//! Monte-Carlo estimators for population quantities of a teacher-training
//! procedure: the infinite-ensemble vote, the expected margin
//! `Δ_n(x) = |E[ĥ₁(x)] − 1/2|`, and the approximate high-margin mass.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Predictor;
use crate::error::{param_err, Result};
use crate::seed::{child_rng, SeededRng};

/// A data distribution together with a teacher-training procedure.
pub trait LearningProblem: Sync {
    type Input: Send + Sync;
    type Model: Predictor<Self::Input> + Send + Sync;

    /// Fresh draws from the marginal over inputs (or a held-out pool).
    fn sample_inputs(&self, count: usize, rng: &mut SeededRng) -> Vec<Self::Input>;

    /// A teacher trained on `n` fresh labeled samples.
    fn train_teacher(&self, n: usize, rng: &mut SeededRng) -> Result<Self::Model>;

    /// The reference classifier h* used for the agreement-with-h* margin.
    fn reference_label(&self, x: &Self::Input) -> u8;

    /// Size of the private data teachers are split from.
    fn private_size(&self) -> usize;

    /// `k` teachers, each on `private_size / k` samples.
    fn train_split_teachers(&self, k: usize, rng: &mut SeededRng) -> Result<Vec<Self::Model>> {
        if k == 0 || k > self.private_size() {
            return param_err(format!("cannot form {k} teachers from {} samples", self.private_size()));
        }
        train_many(self, self.private_size() / k, k, rng)
    }
}

/// `reps` independently trained teachers on `n` samples each.
pub fn train_many<P: LearningProblem + ?Sized>(
    problem: &P,
    n: usize,
    reps: usize,
    rng: &mut SeededRng,
) -> Result<Vec<P::Model>> {
    if reps == 0 {
        return param_err("reps must be at least 1");
    }
    let base: u64 = rng.random();
    (0..reps)
        .into_par_iter()
        .map(|r| problem.train_teacher(n, &mut child_rng(base, r as u64)))
        .collect()
}

/// Mean teacher vote for label 1 at each probe.
pub fn vote_means<X, M: Predictor<X> + Sync>(teachers: &[M], probes: &[X]) -> Vec<f64>
where
    X: Sync,
{
    probes
        .par_iter()
        .map(|x| {
            teachers.iter().filter(|h| h.predict(x) == 1).count() as f64 / teachers.len() as f64
        })
        .collect()
}

/// The infinite-ensemble label `1(E[ĥ₁(x)] ≥ 1/2)` and the estimated
/// `P[ĥ₁(x) = 1]`, from `reps` teachers trained on fresh samples of size `n`.
pub fn estimate_infinite_ensemble<P: LearningProblem>(
    problem: &P,
    n: usize,
    x: &P::Input,
    reps: usize,
    rng: &mut SeededRng,
) -> Result<(u8, f64)> {
    let teachers = train_many(problem, n, reps, rng)?;
    let mean = vote_means(&teachers, std::slice::from_ref(x))[0];
    Ok((u8::from(mean >= 0.5), mean))
}

/// `|mean of ĥ₁(x) − 1/2|` over `reps` fresh teachers.
pub fn estimate_expected_margin<P: LearningProblem>(
    problem: &P,
    n: usize,
    x: &P::Input,
    reps: usize,
    rng: &mut SeededRng,
) -> Result<f64> {
    estimate_infinite_ensemble(problem, n, x, reps, rng).map(|(_, mean)| (mean - 0.5).abs())
}

/// Fraction of `probe_count` fresh probes with estimated expected margin at
/// most `xi`: the mass failing the (ν, ξ) high-margin condition.
pub fn estimate_high_margin_nu<P: LearningProblem>(
    problem: &P,
    n: usize,
    xi: f64,
    probe_count: usize,
    reps: usize,
    rng: &mut SeededRng,
) -> Result<f64> {
    if !(xi > 0.0 && xi <= 0.5) {
        return param_err(format!("xi must lie in (0, 1/2], got {xi}"));
    }
    if probe_count == 0 {
        return param_err("probe_count must be at least 1");
    }
    let teachers = train_many(problem, n, reps, rng)?;
    let probes = problem.sample_inputs(probe_count, rng);
    let low = vote_means(&teachers, &probes)
        .into_iter()
        .filter(|m| (m - 0.5).abs() <= xi)
        .count();
    Ok(low as f64 / probe_count as f64)
}

/// Per-probe margins: agreement among teachers and agreement with h*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginRecord {
    pub probe_id: usize,
    /// `|E[ĥ(x)] − 1/2|`
    pub delta_hat: f64,
    /// `|E[1(ĥ(x) ≠ h*(x))] − 1/2|`
    pub delta_hstar: f64,
}

/// Trains `k` split teachers and measures both margins on `probe_count` probes.
pub fn margin_distribution_report<P: LearningProblem>(
    problem: &P,
    k: usize,
    probe_count: usize,
    rng: &mut SeededRng,
) -> Result<Vec<MarginRecord>> {
    let teachers = problem.train_split_teachers(k, rng)?;
    let probes = problem.sample_inputs(probe_count, rng);
    let means = vote_means(&teachers, &probes);
    Ok(probes
        .iter()
        .zip(means)
        .enumerate()
        .map(|(probe_id, (x, mean))| {
            let disagree = if problem.reference_label(x) == 1 {
                1.0 - mean
            } else {
                mean
            };
            MarginRecord {
                probe_id,
                delta_hat: (mean - 0.5).abs(),
                delta_hstar: (disagree - 0.5).abs(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Occupied bins of width `bin_width` over `[0, 1/2]`.
pub fn margin_histogram(values: &[f64], bin_width: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width > 0.0) {
        return param_err("bin width must be positive");
    }
    let bins = (0.5 / bin_width).ceil() as usize;
    let mut counts = vec![0usize; bins + 1];
    for &v in values {
        let b = ((v / bin_width).floor() as usize).min(bins);
        counts[b] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(b, count)| HistogramBin {
            lower: b as f64 * bin_width,
            upper: (b + 1) as f64 * bin_width,
            count,
        })
        .collect())
}

/// Pearson correlation of two equal-length series.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    /// Teachers output a fixed coin with bias `p` at every input.
    struct CoinProblem {
        p: f64,
    }

    struct Coin(u8);

    impl Predictor<usize> for Coin {
        fn predict(&self, _: &usize) -> u8 {
            self.0
        }
    }

    impl LearningProblem for CoinProblem {
        type Input = usize;
        type Model = Coin;

        fn sample_inputs(&self, count: usize, _: &mut SeededRng) -> Vec<usize> {
            vec![0; count]
        }

        fn train_teacher(&self, _: usize, rng: &mut SeededRng) -> Result<Coin> {
            Ok(Coin(u8::from(rng.random::<f64>() < self.p)))
        }

        fn reference_label(&self, _: &usize) -> u8 {
            1
        }

        fn private_size(&self) -> usize {
            1000
        }
    }

    #[test]
    fn deterministic_teachers_have_half_margin() {
        let mut rng = rng_from_seed(1);
        let m = estimate_expected_margin(&CoinProblem { p: 1.0 }, 10, &0, 50, &mut rng).unwrap();
        assert_eq!(m, 0.5);
        let (label, mean) =
            estimate_infinite_ensemble(&CoinProblem { p: 0.0 }, 10, &0, 1, &mut rng).unwrap();
        assert_eq!((label, mean), (0, 0.0));
    }

    #[test]
    fn coin_flip_teachers_have_small_margin() {
        let reps = 4000;
        let mut rng = rng_from_seed(2);
        let m = estimate_expected_margin(&CoinProblem { p: 0.5 }, 10, &0, reps, &mut rng).unwrap();
        let se = (0.25 / reps as f64).sqrt();
        assert!(m < 3.0 * se, "margin {m}");
    }

    #[test]
    fn standard_error_shrinks_with_reps() {
        let spread = |reps: usize| {
            let mut rng = rng_from_seed(reps as u64);
            let xs: Vec<f64> = (0..200)
                .map(|_| {
                    estimate_infinite_ensemble(&CoinProblem { p: 0.3 }, 1, &0, reps, &mut rng)
                        .unwrap()
                        .1
                })
                .collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
        };
        let s25 = spread(25);
        let s400 = spread(400);
        // 1/sqrt(reps) scaling predicts a ratio of 4.
        let ratio = s25 / s400;
        assert!(ratio > 3.0 && ratio < 5.3, "ratio {ratio}");
    }

    #[test]
    fn nu_limits() {
        let mut rng = rng_from_seed(3);
        let certain = CoinProblem { p: 1.0 };
        assert_eq!(estimate_high_margin_nu(&certain, 5, 1e-9, 10, 20, &mut rng).unwrap(), 0.0);
        assert_eq!(estimate_high_margin_nu(&certain, 5, 0.5, 10, 20, &mut rng).unwrap(), 1.0);
        assert!(estimate_high_margin_nu(&certain, 5, 0.0, 10, 20, &mut rng).is_err());
    }

    #[test]
    fn single_point_domain_has_one_bin() {
        let mut rng = rng_from_seed(4);
        let recs = margin_distribution_report(&CoinProblem { p: 0.8 }, 100, 50, &mut rng).unwrap();
        let values: Vec<f64> = recs.iter().map(|r| r.delta_hat).collect();
        assert_eq!(margin_histogram(&values, 0.05).unwrap().len(), 1);
    }
}
