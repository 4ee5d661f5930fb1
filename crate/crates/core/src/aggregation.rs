//! Private labeling of an adaptive query stream from teacher vote counts.
//!
//! Two session types are provided: [`GaussianSession`] perturbs every vote
//! count with Gaussian noise and pays for each answer, while [`SvtSession`]
//! screens the distance to instability of each vote with a sparse-vector
//! test and pays only for the (at most `T`) answers it withholds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dp::{
    calibrate_gaussian_sigma, calibrate_svt_lambda, ex_post_epsilon, gaussian_unchecked,
    laplace_unchecked, svt_threshold_w, PrivacyBudget,
};
use crate::error::{param_err, Result, SessionError};
use crate::seed::SeededRng;

/// Number of teachers voting 1 out of an ensemble of `total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoteCount {
    ones: usize,
    total: usize,
}

impl VoteCount {
    pub fn new(ones: usize, total: usize) -> Result<Self> {
        if total == 0 {
            return param_err("ensemble size must be at least 1");
        }
        if ones > total {
            return param_err(format!("{ones} votes for 1 exceed ensemble size {total}"));
        }
        Ok(VoteCount { ones, total })
    }

    pub fn ones(&self) -> usize {
        self.ones
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Noiseless majority with ties going to 1.
    pub fn majority(&self) -> u8 {
        u8::from(2 * self.ones >= self.total)
    }
}

/// Realized margin `|2·ones − K|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Margin(pub usize);

pub fn margin(votes: VoteCount) -> Margin {
    Margin((2 * votes.ones).abs_diff(votes.total))
}

/// Number of vote changes the majority survives: `max(0, ⌈margin/2⌉ − 1)`.
pub fn distance_to_instability(votes: VoteCount) -> usize {
    let m = margin(votes).0;
    m.div_ceil(2).saturating_sub(1)
}

/// A released label, or ⊥ when the vote was judged unstable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PseudoLabel {
    Released(u8),
    Bot,
}

impl PseudoLabel {
    pub fn label(&self) -> Option<u8> {
        match *self {
            PseudoLabel::Released(y) => Some(y),
            PseudoLabel::Bot => None,
        }
    }

    pub fn is_bot(&self) -> bool {
        matches!(self, PseudoLabel::Bot)
    }
}

/// Privacy guarantee reported by a labeler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub epsilon: f64,
    pub delta: f64,
}

/// A sequential labeling service answering one vote count at a time.
pub trait VoteLabeler {
    fn answer(&mut self, votes: VoteCount) -> Result<PseudoLabel, SessionError>;

    /// Queries answered so far, including ⊥ answers.
    fn answered(&self) -> usize;

    fn privacy_report(&self) -> PrivacyReport;
}

/// Gaussian-noise voting with σ calibrated for a fixed number of answers.
#[derive(Debug, Clone)]
pub struct GaussianSession {
    sigma: f64,
    budget_ell: usize,
    answered: usize,
    delta: f64,
    rng: SeededRng,
}

impl GaussianSession {
    /// Session allowed `ell` answers under `budget`.
    pub fn new(ell: usize, budget: &PrivacyBudget, rng: SeededRng) -> Result<Self> {
        let sigma = calibrate_gaussian_sigma(ell, budget)?;
        Ok(GaussianSession {
            sigma,
            budget_ell: ell,
            answered: 0,
            delta: budget.delta,
            rng,
        })
    }

    /// Session with an explicit noise level; the report still uses `delta`.
    pub fn with_sigma(sigma: f64, ell: usize, delta: f64, rng: SeededRng) -> Result<Self> {
        if !(sigma > 0.0) || ell == 0 || !(delta > 0.0 && delta < 1.0) {
            return param_err("sigma > 0, ell >= 1 and delta in (0, 1) required");
        }
        Ok(GaussianSession {
            sigma,
            budget_ell: ell,
            answered: 0,
            delta,
            rng,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn budget_ell(&self) -> usize {
        self.budget_ell
    }

    pub fn remaining(&self) -> usize {
        self.budget_ell - self.answered
    }

    pub fn gaussian_answer(&mut self, votes: VoteCount) -> Result<u8, SessionError> {
        if self.answered >= self.budget_ell {
            return Err(SessionError::BudgetExhausted {
                budget: self.budget_ell,
            });
        }
        self.answered += 1;
        let noisy = votes.ones as f64 + gaussian_unchecked(self.sigma, &mut self.rng);
        Ok(u8::from(noisy >= votes.total as f64 / 2.0))
    }
}

impl VoteLabeler for GaussianSession {
    fn answer(&mut self, votes: VoteCount) -> Result<PseudoLabel, SessionError> {
        self.gaussian_answer(votes).map(PseudoLabel::Released)
    }

    fn answered(&self) -> usize {
        self.answered
    }

    fn privacy_report(&self) -> PrivacyReport {
        PrivacyReport {
            epsilon: ex_post_epsilon(self.answered, self.sigma, self.delta),
            delta: self.delta,
        }
    }
}

/// Sparse-vector screening of vote stability with an unstable-answer cutoff.
#[derive(Debug, Clone)]
pub struct SvtSession {
    lambda: f64,
    w: f64,
    noisy_threshold: f64,
    cutoff: usize,
    consumed: usize,
    budget_ell: usize,
    answered: usize,
    threshold_draws: usize,
    budget: PrivacyBudget,
    rng: SeededRng,
}

impl SvtSession {
    pub fn new(cutoff: usize, ell: usize, budget: &PrivacyBudget, mut rng: SeededRng) -> Result<Self> {
        let lambda = calibrate_svt_lambda(cutoff, budget)?;
        let w = svt_threshold_w(lambda, ell, cutoff, budget.delta)?;
        let noisy_threshold = w + laplace_unchecked(lambda, &mut rng);
        Ok(SvtSession {
            lambda,
            w,
            noisy_threshold,
            cutoff,
            consumed: 0,
            budget_ell: ell,
            answered: 0,
            threshold_draws: 1,
            budget: *budget,
            rng,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn noisy_threshold(&self) -> f64 {
        self.noisy_threshold
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// ⊥ answers emitted so far.
    pub fn consumed(&self) -> usize {
        self.consumed
    }

    /// Number of Laplace draws made for the noisy threshold.
    pub fn threshold_draws(&self) -> usize {
        self.threshold_draws
    }

    pub fn is_halted(&self) -> bool {
        self.consumed >= self.cutoff
    }

    pub fn svt_answer(&mut self, votes: VoteCount) -> Result<PseudoLabel, SessionError> {
        if self.is_halted() {
            return Err(SessionError::Halted {
                cutoff: self.cutoff,
            });
        }
        if self.answered >= self.budget_ell {
            return Err(SessionError::BudgetExhausted {
                budget: self.budget_ell,
            });
        }
        self.answered += 1;
        let dist = distance_to_instability(votes) as f64;
        let noisy_dist = dist + laplace_unchecked(2.0 * self.lambda, &mut self.rng);
        if noisy_dist > self.noisy_threshold {
            return Ok(PseudoLabel::Released(votes.majority()));
        }
        self.consumed += 1;
        if !self.is_halted() {
            self.noisy_threshold = self.w + laplace_unchecked(self.lambda, &mut self.rng);
            self.threshold_draws += 1;
        }
        Ok(PseudoLabel::Bot)
    }
}

impl VoteLabeler for SvtSession {
    fn answer(&mut self, votes: VoteCount) -> Result<PseudoLabel, SessionError> {
        self.svt_answer(votes)
    }

    fn answered(&self) -> usize {
        self.answered
    }

    // The cost is fixed by T and λ, whatever the stream did.
    fn privacy_report(&self) -> PrivacyReport {
        PrivacyReport {
            epsilon: self.budget.epsilon,
            delta: self.budget.delta,
        }
    }
}

/// Noiseless majority vote, optionally with a query budget. Not private.
#[derive(Debug, Clone)]
pub struct NoiselessLabeler {
    budget_ell: Option<usize>,
    answered: usize,
}

impl NoiselessLabeler {
    pub fn new(budget_ell: Option<usize>) -> Self {
        NoiselessLabeler {
            budget_ell,
            answered: 0,
        }
    }
}

impl VoteLabeler for NoiselessLabeler {
    fn answer(&mut self, votes: VoteCount) -> Result<PseudoLabel, SessionError> {
        if let Some(budget) = self.budget_ell {
            if self.answered >= budget {
                return Err(SessionError::BudgetExhausted { budget });
            }
        }
        self.answered += 1;
        Ok(PseudoLabel::Released(votes.majority()))
    }

    fn answered(&self) -> usize {
        self.answered
    }

    fn privacy_report(&self) -> PrivacyReport {
        PrivacyReport {
            epsilon: f64::INFINITY,
            delta: 0.0,
        }
    }
}

/// Outcome of one above-threshold test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SvtOutcome {
    Above,
    Below,
}

/// Laplace scale used by [`svt_generic`]: `sqrt(32 T log(1/δ)) / ε`.
pub fn svt_generic_lambda(cutoff: usize, budget: &PrivacyBudget) -> f64 {
    (32.0 * cutoff as f64 * (1.0 / budget.delta).ln()).sqrt() / budget.epsilon
}

/// Above-threshold screening of sensitivity-1 query values with cutoff `T`.
///
/// Stops after the `T`-th [`SvtOutcome::Below`]; the threshold noise is
/// redrawn after every `Below`.
pub fn svt_generic<R: Rng + ?Sized>(
    queries: &[f64],
    cutoff: usize,
    w: f64,
    budget: &PrivacyBudget,
    rng: &mut R,
) -> Result<Vec<SvtOutcome>> {
    if cutoff == 0 {
        return param_err("cutoff T must be at least 1");
    }
    let lambda = svt_generic_lambda(cutoff, budget);
    let mut out = Vec::with_capacity(queries.len());
    if queries.is_empty() {
        return Ok(out);
    }
    let mut noisy_threshold = w + laplace_unchecked(lambda, rng);
    let mut below = 0;
    for &q in queries {
        if q + laplace_unchecked(2.0 * lambda, rng) > noisy_threshold {
            out.push(SvtOutcome::Above);
        } else {
            out.push(SvtOutcome::Below);
            below += 1;
            if below >= cutoff {
                break;
            }
            noisy_threshold = w + laplace_unchecked(lambda, rng);
        }
    }
    Ok(out)
}

/// Releases `value` iff `dist + Lap(1/ε) > Γ`.
pub fn stability_release<V, R: Rng + ?Sized>(
    value: V,
    dist: usize,
    gamma_threshold: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<Option<V>> {
    if !(epsilon > 0.0) {
        return param_err(format!("epsilon must be positive, got {epsilon}"));
    }
    let noisy = dist as f64 + laplace_unchecked(1.0 / epsilon, rng);
    Ok((noisy > gamma_threshold).then_some(value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn votes(ones: usize, total: usize) -> VoteCount {
        VoteCount::new(ones, total).unwrap()
    }

    // P(Lap(b) > t) for t >= 0.
    fn laplace_upper_tail(b: f64, t: f64) -> f64 {
        0.5 * (-t / b).exp()
    }

    #[test]
    fn vote_count_validation() {
        assert!(VoteCount::new(3, 2).is_err());
        assert!(VoteCount::new(0, 0).is_err());
        assert_eq!(votes(2, 4).majority(), 1);
        assert_eq!(votes(1, 4).majority(), 0);
    }

    #[test]
    fn margin_examples() {
        assert_eq!(margin(votes(3, 5)), Margin(1));
        assert_eq!(margin(votes(0, 10)), Margin(10));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance_to_instability(votes(2, 4)), 0); // margin 0
        assert_eq!(distance_to_instability(votes(3, 4)), 0); // margin 2
        assert_eq!(distance_to_instability(votes(4, 5)), 1); // margin 3
    }

    #[test]
    fn flip_sensitivity_exhaustive() {
        for k in 1..=9usize {
            for ones in 0..=k {
                let v = votes(ones, k);
                let m = margin(v).0;
                assert_eq!(m % 2, k % 2, "parity K={k} ones={ones}");
                assert!(m <= k);
                // Neighbours: one teacher flips its vote.
                let neighbours = [ones.checked_sub(1), (ones < k).then_some(ones + 1)];
                for n in neighbours.into_iter().flatten() {
                    let v2 = votes(n, k);
                    let dm = m.abs_diff(margin(v2).0);
                    assert!(dm == 0 || dm == 2, "K={k} ones={ones} -> {n}");
                    let d = distance_to_instability(v) as i64;
                    let d2 = distance_to_instability(v2) as i64;
                    assert!((d - d2).abs() <= 1);
                }
            }
        }
    }

    #[test]
    fn gaussian_unanimous_with_tiny_noise() {
        let mut s = GaussianSession::with_sigma(1e-3, 10_000, 1e-5, rng_from_seed(3)).unwrap();
        let ones = (0..10_000)
            .filter(|_| s.gaussian_answer(votes(25, 25)).unwrap() == 1)
            .count();
        assert!(ones as f64 / 1e4 > 0.999);
    }

    #[test]
    fn gaussian_tie_is_fair_coin() {
        let budget = PrivacyBudget::new(1.0, 1e-5).unwrap();
        let mut s = GaussianSession::new(10_000, &budget, rng_from_seed(4)).unwrap();
        let ones = (0..10_000)
            .filter(|_| s.gaussian_answer(votes(10, 20)).unwrap() == 1)
            .count();
        let freq = ones as f64 / 1e4;
        assert!((freq - 0.5).abs() < 0.02, "tie frequency {freq}");
        // Three Monte-Carlo standard errors.
        assert!((freq - 0.5).abs() < 3.0 * (0.25f64 / 1e4).sqrt());
    }

    #[test]
    fn gaussian_budget_contract() {
        let budget = PrivacyBudget::new(1.0, 1e-5).unwrap();
        let mut s = GaussianSession::new(3, &budget, rng_from_seed(5)).unwrap();
        for _ in 0..3 {
            s.gaussian_answer(votes(1, 2)).unwrap();
        }
        assert_eq!(
            s.gaussian_answer(votes(1, 2)),
            Err(SessionError::BudgetExhausted { budget: 3 })
        );
    }

    #[test]
    fn gaussian_report() {
        let budget = PrivacyBudget::new(1.0, 1e-5).unwrap();
        let mut s = GaussianSession::new(40, &budget, rng_from_seed(6)).unwrap();
        let fresh = s.privacy_report();
        assert_eq!(fresh.epsilon, 0.0);
        assert_eq!(fresh.delta, 1e-5);
        for _ in 0..40 {
            s.answer(votes(5, 9)).unwrap();
        }
        let full = s.privacy_report();
        assert!((full.epsilon - 1.0).abs() < 1e-9);
    }

    #[test]
    fn svt_unanimous_is_released() {
        let budget = PrivacyBudget::new(1.0, 1e-5).unwrap();
        let k = 20_000;
        let mut failures = 0;
        for trial in 0..200 {
            let mut s = SvtSession::new(5, 50, &budget, rng_from_seed(trial)).unwrap();
            // Concentration slack: K/2 far exceeds w plus several noise scales.
            assert!((k / 2) as f64 > s.w() + 40.0 * s.lambda());
            for _ in 0..50 {
                if s.svt_answer(votes(k, k)).unwrap() != PseudoLabel::Released(1) {
                    failures += 1;
                }
            }
        }
        assert_eq!(failures, 0);
    }

    #[test]
    fn svt_tie_rarely_released() {
        let delta = 0.01;
        let budget = PrivacyBudget::new(1.0, delta).unwrap();
        let mut released = 0usize;
        let trials = 100_000;
        let mut w = 0.0;
        let mut lambda = 0.0;
        for trial in 0..trials {
            let mut s = SvtSession::new(1, 1, &budget, rng_from_seed(trial)).unwrap();
            w = s.w();
            lambda = s.lambda();
            if !s.svt_answer(votes(6, 12)).unwrap().is_bot() {
                released += 1;
            }
        }
        let freq = released as f64 / trials as f64;
        // Release needs Lap(2λ) - Lap(λ) > w; bounded by either exceeding w/2.
        let bound = laplace_upper_tail(2.0 * lambda, w / 2.0) + laplace_upper_tail(lambda, w / 2.0);
        assert!(bound < delta);
        assert!(freq < delta, "tie release frequency {freq}");
    }

    #[test]
    fn svt_cutoff_contract_and_threshold_refresh() {
        let budget = PrivacyBudget::new(1.0, 1e-5).unwrap();
        let mut s = SvtSession::new(4, 100, &budget, rng_from_seed(11)).unwrap();
        let mut bots = 0;
        let mut draws_before;
        loop {
            draws_before = s.threshold_draws();
            match s.svt_answer(votes(50_000, 50_000)) {
                Ok(PseudoLabel::Released(_)) => {
                    assert_eq!(s.threshold_draws(), draws_before);
                }
                Ok(PseudoLabel::Bot) => unreachable!(),
                Err(e) => panic!("{e}"),
            }
            if s.answered() == 3 {
                break;
            }
        }
        while !s.is_halted() {
            draws_before = s.threshold_draws();
            assert!(s.svt_answer(votes(3, 6)).unwrap().is_bot());
            bots += 1;
            if !s.is_halted() {
                assert_eq!(s.threshold_draws(), draws_before + 1);
            }
        }
        assert_eq!(bots, 4);
        assert_eq!(s.threshold_draws(), 1 + 3);
        assert_eq!(
            s.svt_answer(votes(3, 6)),
            Err(SessionError::Halted { cutoff: 4 })
        );
    }

    #[test]
    fn svt_report_ignores_stable_answers() {
        let budget = PrivacyBudget::new(1.0, 1e-5).unwrap();
        let mut s = SvtSession::new(20, 1000, &budget, rng_from_seed(12)).unwrap();
        let before = s.privacy_report();
        for _ in 0..1000 {
            assert!(!s.svt_answer(votes(100_000, 100_000)).unwrap().is_bot());
        }
        assert_eq!(s.privacy_report(), before);
        assert_eq!(before.epsilon, 1.0);
        assert_eq!(before.delta, 1e-5);
    }

    #[test]
    fn svt_generic_behaviour() {
        let budget = PrivacyBudget::new(1.0, 1e-6).unwrap();
        let mut rng = rng_from_seed(13);
        let lambda = svt_generic_lambda(3, &budget);
        let w = 10.0;
        let high = vec![w + 200.0 * lambda; 100];
        let out = svt_generic(&high, 3, w, &budget, &mut rng).unwrap();
        assert_eq!(out.len(), 100);
        assert!(out.iter().all(|o| *o == SvtOutcome::Above));

        let low = vec![w - 200.0 * lambda; 100];
        let out = svt_generic(&low, 3, w, &budget, &mut rng).unwrap();
        assert_eq!(out, vec![SvtOutcome::Below; 3]);

        assert!(svt_generic(&[], 3, w, &budget, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn stability_release_tails() {
        let eps = 1.0;
        let delta = 1e-6;
        let gamma = (1.0_f64 / delta).ln() / eps;
        // Analytic release probability at dist 0 is P(Lap(1) > Γ) = δ/2.
        assert!((laplace_upper_tail(1.0 / eps, gamma) - delta / 2.0).abs() < 1e-15);
        let mut rng = rng_from_seed(14);
        let released = (0..1_000_000)
            .filter(|_| stability_release((), 0, gamma, eps, &mut rng).unwrap().is_some())
            .count();
        // Expected 0.5 releases; P(count > 6) < 1e-6.
        assert!(released <= 6, "released {released}");

        let dist = (gamma + 10.0) as usize;
        let released = (0..100_000)
            .filter(|_| stability_release(7u8, dist, gamma, eps, &mut rng).unwrap() == Some(7))
            .count();
        assert!(released as f64 / 1e5 > 0.999);

        assert!((0..1000).all(|_| stability_release((), 1_000_000, f64::INFINITY, eps, &mut rng)
            .unwrap()
            .is_none()));
    }
}
