//! Disagreement-based active learning over a stream: labels are requested
//! only inside the region where surviving hypotheses disagree.

use serde::{Deserialize, Serialize};

use super::params::EliminationBound;
use crate::error::{param_err, Result};
use crate::learners::linear::{fit_weighted, WeightedRow};
use crate::learners::{HypothesisClass, LinearHypothesis, Predictor, SparseVector, TrainerConfig};

/// The learner side of the active loop.
pub trait ActiveLearner {
    type Input;

    /// Whether `x` lies in the current disagreement region.
    fn in_disagreement(&mut self, x: &Self::Input) -> Result<bool>;

    /// Adds a purchased label to the queried set Q.
    fn add_labeled(&mut self, x: Self::Input, y: u8);

    /// Called after the `j`-th stream element whenever `j` is a power of two.
    fn update(&mut self, j: usize) -> Result<()>;

    /// Called once when the stream ends or the budget runs out.
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveRun {
    /// Labels requested.
    pub queries: usize,
    /// Stream elements consumed.
    pub processed: usize,
}

/// Streams `inputs` through `learner`, buying labels from `label` until the
/// stream ends or `query_budget` labels have been bought.
pub fn run_active<L, I, F>(
    learner: &mut L,
    inputs: I,
    query_budget: Option<usize>,
    mut label: F,
) -> Result<ActiveRun>
where
    L: ActiveLearner,
    I: IntoIterator<Item = L::Input>,
    F: FnMut(&L::Input) -> Result<u8>,
{
    if query_budget == Some(0) {
        return param_err("query budget must be at least 1");
    }
    let mut run = ActiveRun {
        queries: 0,
        processed: 0,
    };
    for x in inputs {
        run.processed += 1;
        let j = run.processed;
        if learner.in_disagreement(&x)? {
            let y = label(&x)?;
            learner.add_labeled(x, y);
            run.queries += 1;
        }
        if j.is_power_of_two() {
            learner.update(j)?;
        }
        if query_budget.is_some_and(|b| run.queries >= b) {
            break;
        }
    }
    learner.finish()?;
    Ok(run)
}

/// Exact version-space learner over an enumerable class.
#[derive(Debug, Clone)]
pub struct VersionSpaceLearner<'c, C: HypothesisClass> {
    class: &'c C,
    alive: Vec<usize>,
    queried: Vec<(C::Input, u8)>,
    bound: EliminationBound,
    gamma: f64,
    current: usize,
}

impl<'c, C: HypothesisClass> VersionSpaceLearner<'c, C>
where
    C::Input: Clone,
{
    /// Starts from the whole class; `best_error` is `Err(h*)` (0 when
    /// realizable) and `c_prime` the leading constant of the bound.
    pub fn new(class: &'c C, gamma: f64, c_prime: f64, best_error: f64) -> Result<Self> {
        if class.size() == 0 {
            return param_err("empty hypothesis class");
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return param_err(format!("gamma must lie in (0, 1), got {gamma}"));
        }
        if !(c_prime > 0.0) || !(0.0..=1.0).contains(&best_error) {
            return param_err("c' must be positive and Err(h*) in [0, 1]");
        }
        Ok(VersionSpaceLearner {
            class,
            alive: (0..class.size()).collect(),
            queried: Vec::new(),
            bound: EliminationBound {
                c_prime,
                vc_dimension: class.vc_dimension(),
                theta: class.disagreement_coefficient(),
                best_error,
            },
            gamma,
            current: 0,
        })
    }

    /// Indices of the surviving hypotheses, increasing.
    pub fn alive(&self) -> &[usize] {
        &self.alive
    }

    pub fn queried(&self) -> &[(C::Input, u8)] {
        &self.queried
    }

    /// Index of the current output hypothesis.
    pub fn current(&self) -> usize {
        self.current
    }

    pub fn bound(&self) -> &EliminationBound {
        &self.bound
    }
}

impl<C: HypothesisClass> ActiveLearner for VersionSpaceLearner<'_, C>
where
    C::Input: Clone,
{
    type Input = C::Input;

    fn in_disagreement(&mut self, x: &C::Input) -> Result<bool> {
        let first = self.class.predict_member(self.alive[0], x);
        Ok(self.alive[1..].iter().any(|&h| self.class.predict_member(h, x) != first))
    }

    fn add_labeled(&mut self, x: C::Input, y: u8) {
        self.queried.push((x, y));
    }

    fn update(&mut self, j: usize) -> Result<()> {
        let mistakes: Vec<usize> = self
            .alive
            .iter()
            .map(|&h| self.class.mistakes(h, &self.queried))
            .collect();
        let best = *mistakes.iter().min().expect("version space is never empty");
        let allowance = self.bound.allowance(j, self.gamma);
        let survivors: Vec<usize> = self
            .alive
            .iter()
            .zip(&mistakes)
            .filter(|(_, &m)| (m - best) as f64 <= allowance)
            .map(|(&h, _)| h)
            .collect();
        self.alive = survivors;
        // Any member of V will do; take the lowest-index empirical minimizer.
        self.current = self
            .alive
            .iter()
            .copied()
            .find(|&h| self.class.mistakes(h, &self.queried) == best)
            .expect("a minimizer always survives");
        Ok(())
    }
}

/// Disagreement surrogate for linear classes: `x` is in the region iff for
/// both labels a fit forced to predict that label on `x` stays within
/// `slack·|Q|` mistakes on Q of the reference fit.
#[derive(Debug, Clone)]
pub struct SurrogateLearner {
    dim: usize,
    queried: Vec<(SparseVector, u8)>,
    reference: LinearHypothesis,
    trainer: TrainerConfig,
    probe_trainer: TrainerConfig,
    slack: SurrogateSlack,
    final_refit: bool,
}

/// Tolerance of the constrained fits, in mistakes per queried point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum SurrogateSlack {
    /// `1/|Q|`: one extra mistake.
    #[default]
    OneMistake,
    Fraction(f64),
    /// Every point is in the region; the learner degenerates to passive.
    Unbounded,
}

impl SurrogateLearner {
    pub fn new(dim: usize, trainer: TrainerConfig, slack: SurrogateSlack) -> Result<Self> {
        if let SurrogateSlack::Fraction(s) = slack {
            if !(s >= 0.0) {
                return param_err("slack must be nonnegative");
            }
        }
        Ok(SurrogateLearner {
            dim,
            queried: Vec::new(),
            reference: LinearHypothesis::zeros(dim),
            trainer,
            probe_trainer: TrainerConfig {
                max_iters: (trainer.max_iters / 5).max(20),
                ..trainer
            },
            slack,
            final_refit: true,
        })
    }

    /// Whether `finish` retrains on everything in Q (default on).
    pub fn with_final_refit(mut self, on: bool) -> Self {
        self.final_refit = on;
        self
    }

    pub fn hypothesis(&self) -> &LinearHypothesis {
        &self.reference
    }

    pub fn into_hypothesis(self) -> LinearHypothesis {
        self.reference
    }

    pub fn queried(&self) -> &[(SparseVector, u8)] {
        &self.queried
    }

    fn mistakes_on_q(&self, h: &LinearHypothesis) -> usize {
        self.queried.iter().filter(|(x, y)| h.predict(x) != *y).count()
    }

    fn refit(&mut self) -> Result<()> {
        if self.queried.is_empty() {
            return Ok(());
        }
        let rows: Vec<WeightedRow<'_>> = self
            .queried
            .iter()
            .map(|(x, y)| WeightedRow { features: x, label: *y, weight: 1.0 })
            .collect();
        self.reference = fit_weighted(&rows, self.dim, &self.trainer, None)?;
        Ok(())
    }
}

impl ActiveLearner for SurrogateLearner {
    type Input = SparseVector;

    fn in_disagreement(&mut self, x: &SparseVector) -> Result<bool> {
        let q = self.queried.len();
        let allowed = match self.slack {
            _ if q == 0 => return Ok(true),
            SurrogateSlack::Unbounded => return Ok(true),
            SurrogateSlack::OneMistake => 1.0,
            SurrogateSlack::Fraction(s) => s * q as f64,
        };
        let base = self.mistakes_on_q(&self.reference) as f64;
        for forced in [0u8, 1] {
            let mut rows: Vec<WeightedRow<'_>> = self
                .queried
                .iter()
                .map(|(xq, yq)| WeightedRow { features: xq, label: *yq, weight: 1.0 })
                .collect();
            rows.push(WeightedRow { features: x, label: forced, weight: q as f64 });
            let fit = fit_weighted(&rows, self.dim.max(x.dim()), &self.probe_trainer, Some(&self.reference))?;
            if fit.predict(x) != forced || self.mistakes_on_q(&fit) as f64 > base + allowed {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn add_labeled(&mut self, x: SparseVector, y: u8) {
        self.queried.push((x, y));
    }

    fn update(&mut self, _j: usize) -> Result<()> {
        self.refit()
    }

    fn finish(&mut self) -> Result<()> {
        if self.final_refit {
            self.refit()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{FiniteHypothesisClass, ThresholdClass};
    use crate::seed::rng_from_seed;
    use rand::Rng;

    #[test]
    fn singleton_version_space_never_disagrees() {
        let class = FiniteHypothesisClass::new(vec![vec![0, 1, 1]]).unwrap();
        let mut l = VersionSpaceLearner::new(&class, 0.1, 1.0, 0.0).unwrap();
        for x in 0..3 {
            assert!(!l.in_disagreement(&x).unwrap());
        }
    }

    #[test]
    fn threshold_disagreement_region() {
        let class = ThresholdClass::unit_grid(100);
        let mut l = VersionSpaceLearner::new(&class, 0.1, 1.0, 0.0).unwrap();
        l.add_labeled(0.2, 0);
        l.add_labeled(0.8, 1);
        // Zero allowance: keep exactly the consistent thresholds.
        l.bound.c_prime = 1e-12;
        l.update(1).unwrap();
        // Brute force over the grid: consistent thresholds lie in [0.2, 0.8).
        let consistent: Vec<usize> = (0..class.size())
            .filter(|&h| class.mistakes(h, l.queried()) == 0)
            .collect();
        assert_eq!(l.alive(), consistent.as_slice());
        assert!(l.in_disagreement(&0.5).unwrap());
        assert!(!l.in_disagreement(&0.1).unwrap());
        assert!(!l.in_disagreement(&0.9).unwrap());
    }

    #[test]
    fn version_space_never_grows_and_keeps_target() {
        let class = ThresholdClass::unit_grid(200);
        for seed in 0..100u64 {
            let mut rng = rng_from_seed(seed);
            let target = rng.random_range(0..class.size());
            let t = class.threshold(target);
            let mut l = VersionSpaceLearner::new(&class, 0.05, 1.0, 0.0).unwrap();
            let mut last = l.alive().len();
            let stream: Vec<f64> = (0..512).map(|_| rng.random()).collect();
            let mut j = 0usize;
            for x in stream {
                j += 1;
                if l.in_disagreement(&x).unwrap() {
                    l.add_labeled(x, u8::from(x > t));
                }
                if j.is_power_of_two() {
                    l.update(j).unwrap();
                    assert!(l.alive().len() <= last);
                    last = l.alive().len();
                    assert!(l.alive().contains(&target), "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn run_active_respects_budget() {
        let class = ThresholdClass::unit_grid(100);
        let mut l = VersionSpaceLearner::new(&class, 0.05, 1.0, 0.0).unwrap();
        let mut rng = rng_from_seed(3);
        let stream: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
        let run = run_active(&mut l, stream, Some(5), |x| Ok(u8::from(*x > 0.3))).unwrap();
        assert_eq!(run.queries, 5);
        assert!(run.processed >= 5);
        assert!(run_active(&mut l, Vec::<f64>::new(), Some(0), |_| Ok(0)).is_err());
    }

    fn blob_stream(n: usize, seed: u64) -> Vec<(SparseVector, u8)> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| {
                let y = rng.random_range(0..2u8);
                let c = if y == 1 { 1.0 } else { -1.0 };
                let x = [c + rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)];
                (SparseVector::from_dense(&x), y)
            })
            .collect()
    }

    #[test]
    fn unbounded_slack_is_passive() {
        let data = blob_stream(40, 5);
        let mut l = SurrogateLearner::new(2, TrainerConfig::default(), SurrogateSlack::Unbounded).unwrap();
        let labels: std::collections::HashMap<String, u8> =
            data.iter().map(|(x, y)| (format!("{x:?}"), *y)).collect();
        let run = run_active(&mut l, data.iter().map(|(x, _)| x.clone()), None, |x| {
            Ok(labels[&format!("{x:?}")])
        })
        .unwrap();
        assert_eq!(run.queries, 40);
        let queried: Vec<(SparseVector, u8)> = l.queried().to_vec();
        assert_eq!(queried, data);
    }

    #[test]
    fn surrogate_skips_confident_points() {
        let data = blob_stream(400, 6);
        let mut l = SurrogateLearner::new(2, TrainerConfig::default(), SurrogateSlack::OneMistake).unwrap();
        let mut queries = 0;
        for (j, (x, y)) in data.iter().enumerate() {
            if l.in_disagreement(x).unwrap() {
                l.add_labeled(x.clone(), *y);
                queries += 1;
            }
            if (j + 1).is_power_of_two() {
                l.update(j + 1).unwrap();
            }
        }
        l.finish().unwrap();
        assert!(queries < 200, "queried {queries}");
        let err = data.iter().filter(|(x, y)| l.hypothesis().predict(x) != *y).count();
        assert!(err <= 4, "errors {err}");
    }
}
