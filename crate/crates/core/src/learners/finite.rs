//! Explicitly enumerable hypothesis classes, where ERM and version spaces
//! can be computed exactly.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Predictor;
use crate::error::{param_err, Result};

/// A hypothesis class whose members can be enumerated by index.
pub trait HypothesisClass: Sync {
    type Input;

    fn size(&self) -> usize;

    fn predict_member(&self, member: usize, x: &Self::Input) -> u8;

    /// VC dimension `d`.
    fn vc_dimension(&self) -> f64;

    /// Disagreement coefficient θ used by the active learner's bound.
    fn disagreement_coefficient(&self) -> f64;

    fn mistakes(&self, member: usize, sample: &[(Self::Input, u8)]) -> usize {
        sample
            .iter()
            .filter(|(x, y)| self.predict_member(member, x) != *y)
            .count()
    }
}

/// How ERM chooses among several empirical-risk minimizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieBreak {
    LowestIndex,
    /// Uniform over the minimizers (random scan order).
    #[default]
    Random,
}

/// Exhaustive empirical risk minimization over `candidates`.
pub fn erm_among<C: HypothesisClass, R: Rng + ?Sized>(
    class: &C,
    candidates: &[usize],
    sample: &[(C::Input, u8)],
    tie: TieBreak,
    rng: &mut R,
) -> Result<usize> {
    if candidates.is_empty() {
        return param_err("ERM over an empty set of hypotheses");
    }
    let mut order = candidates.to_vec();
    if tie == TieBreak::Random {
        order.shuffle(rng);
    }
    let mut best = order[0];
    let mut best_mistakes = usize::MAX;
    for &h in &order {
        let m = class.mistakes(h, sample);
        if m < best_mistakes {
            best = h;
            best_mistakes = m;
        }
    }
    Ok(best)
}

/// ERM over the whole class.
pub fn erm_finite<C: HypothesisClass, R: Rng + ?Sized>(
    class: &C,
    sample: &[(C::Input, u8)],
    tie: TieBreak,
    rng: &mut R,
) -> Result<usize> {
    let all: Vec<usize> = (0..class.size()).collect();
    erm_among(class, &all, sample, tie, rng)
}

/// Hypotheses given as label tables over the domain `{0, …, domain_size − 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteHypothesisClass {
    domain_size: usize,
    members: Vec<Vec<u8>>,
    vc_dimension: f64,
    disagreement_coefficient: f64,
}

impl FiniteHypothesisClass {
    pub fn new(members: Vec<Vec<u8>>) -> Result<Self> {
        let Some(first) = members.first() else {
            return param_err("a hypothesis class needs at least one member");
        };
        let domain_size = first.len();
        if members.iter().any(|m| m.len() != domain_size || m.iter().any(|&y| y > 1)) {
            return param_err("members must be 0/1 tables over a common domain");
        }
        // log2|H| bounds the VC dimension of a finite class.
        let vc_dimension = (members.len() as f64).log2().max(1.0);
        Ok(FiniteHypothesisClass {
            domain_size,
            members,
            vc_dimension,
            disagreement_coefficient: domain_size as f64,
        })
    }

    pub fn with_disagreement_coefficient(mut self, theta: f64) -> Self {
        self.disagreement_coefficient = theta;
        self
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn member(&self, index: usize) -> FiniteMember {
        FiniteMember {
            labels: self.members[index].clone(),
        }
    }

    pub fn members(&self) -> &[Vec<u8>] {
        &self.members
    }
}

impl HypothesisClass for FiniteHypothesisClass {
    type Input = usize;

    fn size(&self) -> usize {
        self.members.len()
    }

    fn predict_member(&self, member: usize, x: &usize) -> u8 {
        self.members[member][*x]
    }

    fn vc_dimension(&self) -> f64 {
        self.vc_dimension
    }

    fn disagreement_coefficient(&self) -> f64 {
        self.disagreement_coefficient
    }
}

/// One member of a [`FiniteHypothesisClass`], detached from the class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteMember {
    pub labels: Vec<u8>,
}

impl Predictor<usize> for FiniteMember {
    fn predict(&self, x: &usize) -> u8 {
        self.labels[*x]
    }
}

/// One-dimensional thresholds `x ↦ 1(x > t)` over a fixed grid of `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdClass {
    thresholds: Vec<f64>,
}

impl ThresholdClass {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() || thresholds.iter().any(|t| t.is_nan()) {
            return param_err("thresholds must be a nonempty list of numbers");
        }
        Ok(ThresholdClass { thresholds })
    }

    /// Thresholds `i / resolution` for `i = 0..=resolution`.
    pub fn unit_grid(resolution: usize) -> Self {
        let r = resolution.max(1);
        ThresholdClass {
            thresholds: (0..=r).map(|i| i as f64 / r as f64).collect(),
        }
    }

    pub fn threshold(&self, member: usize) -> f64 {
        self.thresholds[member]
    }
}

impl HypothesisClass for ThresholdClass {
    type Input = f64;

    fn size(&self) -> usize {
        self.thresholds.len()
    }

    fn predict_member(&self, member: usize, x: &f64) -> u8 {
        u8::from(*x > self.thresholds[member])
    }

    fn vc_dimension(&self) -> f64 {
        1.0
    }

    fn disagreement_coefficient(&self) -> f64 {
        2.0
    }
}

/// The classifier `x ↦ 1(x > t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold(pub f64);

impl Predictor<f64> for Threshold {
    fn predict(&self, x: &f64) -> u8 {
        u8::from(*x > self.0)
    }
}

/// Exact ERM over all real thresholds. Returns the midpoint of the first
/// gap between sorted points achieving the fewest mistakes.
pub fn erm_threshold(sample: &[(f64, u8)]) -> Result<Threshold> {
    if sample.is_empty() {
        return param_err("threshold ERM needs at least one point");
    }
    let mut pts = sample.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Threshold below every point: all predicted 1, mistakes = #zeros.
    let mut mistakes = pts.iter().filter(|p| p.1 == 0).count() as i64;
    let mut best = mistakes;
    let mut best_t = pts[0].0 - 1.0;
    for i in 0..pts.len() {
        // Moving the threshold past point i flips its prediction to 0.
        mistakes += if pts[i].1 == 0 { -1 } else { 1 };
        if i + 1 < pts.len() && pts[i + 1].0 == pts[i].0 {
            continue;
        }
        if mistakes < best {
            best = mistakes;
            best_t = match pts.get(i + 1) {
                Some(next) => 0.5 * (pts[i].0 + next.0),
                None => pts[i].0 + 1.0,
            };
        }
    }
    Ok(Threshold(best_t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn finite_erm_lowest_index_and_random() {
        let class = FiniteHypothesisClass::new(vec![vec![1, 1, 0], vec![1, 0, 1], vec![0, 0, 0]]).unwrap();
        let sample = vec![(0usize, 1u8)];
        let mut rng = rng_from_seed(1);
        assert_eq!(erm_finite(&class, &sample, TieBreak::LowestIndex, &mut rng).unwrap(), 0);
        let mut seen = [0usize; 3];
        for _ in 0..600 {
            seen[erm_finite(&class, &sample, TieBreak::Random, &mut rng).unwrap()] += 1;
        }
        assert_eq!(seen[2], 0);
        assert!(seen[0] > 240 && seen[1] > 240, "{seen:?}");
    }

    #[test]
    fn finite_class_validation() {
        assert!(FiniteHypothesisClass::new(vec![]).is_err());
        assert!(FiniteHypothesisClass::new(vec![vec![1, 0], vec![1]]).is_err());
        assert!(FiniteHypothesisClass::new(vec![vec![2]]).is_err());
    }

    // Brute force over candidate thresholds at every point and between.
    fn brute_force_min_mistakes(sample: &[(f64, u8)]) -> usize {
        let mut cands: Vec<f64> = sample.iter().map(|p| p.0).collect();
        cands.push(f64::NEG_INFINITY);
        cands
            .iter()
            .map(|&t| sample.iter().filter(|(x, y)| u8::from(*x > t) != *y).count())
            .min()
            .unwrap()
    }

    #[test]
    fn threshold_erm_matches_brute_force() {
        let mut rng = rng_from_seed(2);
        for _ in 0..200 {
            let n = rng.random_range(1..30);
            let sample: Vec<(f64, u8)> = (0..n)
                .map(|_| ((rng.random_range(0..10) as f64) / 10.0, rng.random_range(0..2)))
                .collect();
            let t = erm_threshold(&sample).unwrap();
            let m = sample.iter().filter(|(x, y)| t.predict(x) != *y).count();
            assert_eq!(m, brute_force_min_mistakes(&sample));
        }
    }

    #[test]
    fn threshold_erm_realizable_midpoint() {
        let sample = vec![(0.1, 0), (0.4, 0), (0.6, 1), (0.9, 1)];
        let t = erm_threshold(&sample).unwrap();
        assert!((t.0 - 0.5).abs() < 1e-12);
    }
}
