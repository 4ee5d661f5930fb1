//! Closed-form choices of ensemble size, cutoff and the active learner's
//! elimination bound.

use serde::{Deserialize, Serialize};

use crate::dp::{calibrate_svt_lambda, PrivacyBudget};
use crate::error::{param_err, Result};

/// Unrounded `6 √(log 2n) (√(m log(1/δ)) + √(m log(1/δ) + εm)) / ε`.
pub fn gaussian_k_real(m: usize, budget: &PrivacyBudget, n: usize) -> Result<f64> {
    if m == 0 || n == 0 {
        return param_err("m and n must be positive");
    }
    let (m, eps) = (m as f64, budget.epsilon);
    let l = (1.0 / budget.delta).ln();
    let root = (m * l).sqrt() + (m * l + eps * m).sqrt();
    Ok(6.0 * (2.0 * n as f64).ln().sqrt() * root / eps)
}

/// Ensemble size for the Gaussian mechanism answering `m` queries, `n`
/// being the private sample size.
pub fn compute_k_for_gaussian(m: usize, budget: &PrivacyBudget, n: usize) -> Result<usize> {
    gaussian_k_real(m, budget, n).map(|k| k.ceil() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SvtParams {
    pub cutoff: usize,
    pub k: usize,
}

/// Cutoff `T = ⌈3(err·m + √(m log(m/β)/2))⌉` and ensemble size
/// `K = ⌈136 log(4mT/min(δ, β/2)) √(T log(2/δ)) / ε⌉`.
pub fn compute_svt_params(
    m: usize,
    expected_teacher_error: f64,
    beta: f64,
    budget: &PrivacyBudget,
) -> Result<SvtParams> {
    if m == 0 {
        return param_err("m must be positive");
    }
    if !(0.0..=1.0).contains(&expected_teacher_error) {
        return param_err("expected teacher error must lie in [0, 1]");
    }
    if !(beta > 0.0 && beta < 1.0) {
        return param_err("beta must lie in (0, 1)");
    }
    let mf = m as f64;
    let t = 3.0 * (expected_teacher_error * mf + (mf * (mf / beta).ln().max(0.0) / 2.0).sqrt());
    let cutoff = (t.ceil() as usize).max(1);
    let k = svt_finish_k(m, cutoff, beta, budget);
    Ok(SvtParams {
        cutoff,
        k: k.ceil() as usize,
    })
}

/// Unrounded ensemble size under which at most `cutoff` low-margin queries
/// still let the session finish.
pub fn svt_finish_k(m: usize, cutoff: usize, beta: f64, budget: &PrivacyBudget) -> f64 {
    let tf = cutoff as f64;
    let floor = budget.delta.min(beta / 2.0);
    136.0 * (4.0 * m as f64 * tf / floor).ln() * (tf * (2.0 / budget.delta).ln()).sqrt()
        / budget.epsilon
}

/// `(T, K)` for a problem satisfying the `(ν, ξ)` high-margin condition:
/// `T ≥ νm + √(2νm log(3/γ)) + (2/3) log(3/γ)` and
/// `K ≥ max{2 log(3m/γ)/ξ², 3λ(log(4m/δ) + log(3m/γ))/ξ}`.
pub fn svt_works_params(
    m: usize,
    nu: f64,
    xi: f64,
    gamma: f64,
    budget: &PrivacyBudget,
) -> Result<SvtParams> {
    if m == 0 {
        return param_err("m must be positive");
    }
    if !(0.0..=1.0).contains(&nu) || !(xi > 0.0 && xi <= 0.5) || !(gamma > 0.0 && gamma < 1.0) {
        return param_err("need nu in [0, 1], xi in (0, 1/2], gamma in (0, 1)");
    }
    let mf = m as f64;
    let l3 = (3.0 / gamma).ln();
    let t = nu * mf + (2.0 * nu * mf * l3).sqrt() + 2.0 / 3.0 * l3;
    let cutoff = (t.ceil() as usize).max(1);
    let lambda = calibrate_svt_lambda(cutoff, budget)?;
    let l3m = (3.0 * mf / gamma).ln();
    let k = (2.0 * l3m / (xi * xi)).max(3.0 * lambda * ((4.0 * mf / budget.delta).ln() + l3m) / xi);
    Ok(SvtParams {
        cutoff,
        k: k.ceil() as usize,
    })
}

/// Per-round failure probability `γ_j = γ / (log₂ 2j)²`.
pub fn gamma_schedule(gamma: f64, j: usize) -> f64 {
    let l = (2.0 * j as f64).log2();
    gamma / (l * l)
}

/// Constants of the elimination bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EliminationBound {
    /// Leading constant `c′`.
    pub c_prime: f64,
    pub vc_dimension: f64,
    /// Disagreement coefficient θ.
    pub theta: f64,
    /// `Err(h*)`, zero in the realizable case.
    pub best_error: f64,
}

impl EliminationBound {
    /// `U(j, γ_j) = c′(d log θ + log(1/γ_j))/j + c′ √(Err(h*)(d log θ + log(1/γ_j))/j)`.
    pub fn u(&self, j: usize, gamma_j: f64) -> f64 {
        let jf = j as f64;
        let complexity = self.vc_dimension * self.theta.ln() + (1.0 / gamma_j).ln();
        self.c_prime * complexity / jf + self.c_prime * (self.best_error * complexity / jf).sqrt()
    }

    /// Mistake allowance `U(j, γ_j)·j` compared against excess mistakes on Q.
    pub fn allowance(&self, j: usize, gamma: f64) -> f64 {
        self.u(j, gamma_schedule(gamma, j)) * j as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::calibrate_gaussian_sigma;

    fn b(eps: f64, delta: f64) -> PrivacyBudget {
        PrivacyBudget::new(eps, delta).unwrap()
    }

    #[test]
    fn gaussian_k_matches_sigma_identity() {
        for &m in &[1usize, 49, 1000] {
            for &eps in &[0.1, 0.5, 1.0, 2.0] {
                for &delta in &[1e-5, 1e-8] {
                    for &n in &[100usize, 6499, 1_000_000] {
                        let budget = b(eps, delta);
                        let sigma = calibrate_gaussian_sigma(m, &budget).unwrap();
                        let identity = 6.0 * sigma * (2.0 * (2.0 * n as f64).ln()).sqrt();
                        let k = gaussian_k_real(m, &budget, n).unwrap();
                        assert!(((k - identity) / identity).abs() < 1e-9);
                        assert_eq!(compute_k_for_gaussian(m, &budget, n).unwrap(), k.ceil() as usize);
                    }
                }
            }
        }
    }

    #[test]
    fn gaussian_k_scaling() {
        let budget = b(1.0, 1e-5);
        let k1 = gaussian_k_real(100, &budget, 1000).unwrap();
        let k4 = gaussian_k_real(400, &budget, 1000).unwrap();
        assert!((k4 / k1 - 2.0).abs() < 1e-9);
        // Halving ε multiplies K by a factor just under 2: the εm term
        // inside the second root shrinks too.
        for &eps in &[0.1, 1.0, 4.0] {
            let full = gaussian_k_real(100, &b(eps, 1e-5), 1000).unwrap();
            let half = gaussian_k_real(100, &b(eps / 2.0, 1e-5), 1000).unwrap();
            assert!(half / full > 1.8 && half / full < 2.0, "eps {eps}: {}", half / full);
        }
    }

    #[test]
    fn svt_params_formula() {
        let budget = b(1.0, 1e-5);
        let (m, beta) = (1000usize, 0.05);
        let p = compute_svt_params(m, 0.0, beta, &budget).unwrap();
        let t = (3.0 * (1000.0 * (1000.0_f64 / beta).ln() / 2.0).sqrt()).ceil() as usize;
        assert_eq!(p.cutoff, t);
        let k = 136.0 * (4.0 * 1000.0 * t as f64 / 1e-5).ln() * (t as f64 * (2e5_f64).ln()).sqrt();
        assert_eq!(p.k, k.ceil() as usize);

        // Linear term dominant: doubling m slightly more than doubles T.
        let a = compute_svt_params(10_000, 0.3, beta, &budget).unwrap().cutoff as f64;
        let c = compute_svt_params(20_000, 0.3, beta, &budget).unwrap().cutoff as f64;
        assert!(c / a > 2.0 - 0.05 && c / a < 2.2);
        assert!(compute_svt_params(0, 0.1, beta, &budget).is_err());
    }

    #[test]
    fn svt_works_formula() {
        let budget = b(1.0, 1e-5);
        let p = svt_works_params(500, 0.02, 0.2, 0.1, &budget).unwrap();
        let l3 = 30.0_f64.ln();
        let t = 10.0 + (20.0 * l3).sqrt() + 2.0 / 3.0 * l3;
        assert_eq!(p.cutoff, t.ceil() as usize);
        let lambda = calibrate_svt_lambda(p.cutoff, &budget).unwrap();
        let k = (2.0 * 15000.0_f64.ln() / 0.04).max(3.0 * lambda * ((2000.0 / 1e-5_f64).ln() + 15000.0_f64.ln()) / 0.2);
        assert_eq!(p.k, k.ceil() as usize);
    }

    #[test]
    fn gamma_schedule_values() {
        assert_eq!(gamma_schedule(0.1, 1), 0.1);
        assert_eq!(gamma_schedule(0.1, 2), 0.1 / 4.0);
        assert_eq!(gamma_schedule(0.1, 4), 0.1 / 9.0);
        assert!((gamma_schedule(0.05, 4096) - 0.05 / 169.0).abs() < 1e-15);
    }

    #[test]
    fn elimination_bound_realizable() {
        let bound = EliminationBound {
            c_prime: 1.0,
            vc_dimension: 1.0,
            theta: 2.0,
            best_error: 0.0,
        };
        let gj = gamma_schedule(0.05, 8);
        assert!((bound.allowance(8, 0.05) - (2.0_f64.ln() + (1.0 / gj).ln())).abs() < 1e-12);
        let agnostic = EliminationBound { best_error: 0.1, ..bound };
        assert!(agnostic.u(64, gj) > bound.u(64, gj));
    }
}
