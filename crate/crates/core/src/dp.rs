//! Noise samplers, zCDP accounting and closed-form calibration of mechanism
//! parameters from an (ε, δ) budget.
//!
//! All accounting is done in zero-concentrated DP (ρ), which composes
//! additively, and converted to (ε, δ) only for reporting.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

/// Target (ε, δ) guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return param_err(format!("epsilon must be positive and finite, got {epsilon}"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return param_err(format!("delta must lie in (0, 1), got {delta}"));
        }
        let budget = PrivacyBudget { epsilon, delta };
        if !budget.within_analysed_regime() {
            log::warn!(
                "epsilon {epsilon} exceeds log(1/delta) = {:.4}; utility guarantees assume epsilon <= log(1/delta)",
                (1.0 / delta).ln()
            );
        }
        Ok(budget)
    }

    /// Whether ε ≤ log(1/δ), the range the utility analysis covers.
    pub fn within_analysed_regime(&self) -> bool {
        self.epsilon <= (1.0 / self.delta).ln()
    }
}

/// Running zCDP cost of a sequence of releases.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PrivacyAccount {
    rho: f64,
}

impl PrivacyAccount {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Adds a release costing `rho`.
    pub fn charge(&mut self, rho: f64) -> Result<()> {
        if !(rho >= 0.0) {
            return param_err(format!("zCDP increment must be nonnegative, got {rho}"));
        }
        self.rho += rho;
        Ok(())
    }

    /// Adds one sensitivity-1 Gaussian release with standard deviation `sigma`.
    pub fn charge_gaussian(&mut self, sigma: f64) -> Result<()> {
        if !(sigma > 0.0) {
            return param_err(format!("sigma must be positive, got {sigma}"));
        }
        self.charge(gaussian_composition_rho(1, sigma))
    }

    pub fn epsilon(&self, delta: f64) -> f64 {
        zcdp_to_dp(self.rho, delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseKind {
    Laplace,
    Gaussian,
}

/// A noise distribution: Laplace with scale λ or Gaussian with standard deviation σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseScale {
    kind: NoiseKind,
    scale: f64,
}

impl NoiseScale {
    pub fn laplace(scale: f64) -> Result<Self> {
        Self::new(NoiseKind::Laplace, scale)
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, sigma)
    }

    pub fn new(kind: NoiseKind, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return param_err(format!("noise scale must be positive, got {scale}"));
        }
        Ok(NoiseScale { kind, scale })
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Laplace => laplace_unchecked(self.scale, rng),
            NoiseKind::Gaussian => gaussian_unchecked(self.scale, rng),
        }
    }
}

/// Draws from the Laplace distribution with density exp(-|x|/scale) / (2 scale).
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0) {
        return param_err(format!("laplace scale must be positive, got {scale}"));
    }
    Ok(laplace_unchecked(scale, rng))
}

/// Draws from N(0, sigma²).
pub fn sample_gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> Result<f64> {
    if !(sigma > 0.0) {
        return param_err(format!("gaussian sigma must be positive, got {sigma}"));
    }
    Ok(gaussian_unchecked(sigma, rng))
}

// Inverse CDF of a uniform draw on the open interval (0, 1).
pub(crate) fn laplace_unchecked<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    if u < 0.5 {
        scale * (2.0 * u).ln()
    } else {
        -scale * (2.0 * (1.0 - u)).ln()
    }
}

pub(crate) fn gaussian_unchecked<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

fn check_positive_count(name: &str, value: usize) -> Result<()> {
    if value == 0 {
        return param_err(format!("{name} must be at least 1"));
    }
    Ok(())
}

/// Noise level σ for `ell` adaptive Gaussian vote releases meeting `budget`.
///
/// Closed-form root of `sqrt(2 ell log(1/δ)) / σ + ell / (2σ²) = ε`.
pub fn calibrate_gaussian_sigma(ell: usize, budget: &PrivacyBudget) -> Result<f64> {
    check_positive_count("ell", ell)?;
    let ell = ell as f64;
    let a = 2.0 * ell * (1.0 / budget.delta).ln();
    Ok((a.sqrt() + (a + 2.0 * budget.epsilon * ell).sqrt()) / (2.0 * budget.epsilon))
}

/// Laplace scale λ for an SVT labeler allowed `cutoff` unstable answers.
///
/// T compositions of (1/λ²·2)-zCDP convert to (ε, δ/2)-DP at this λ.
pub fn calibrate_svt_lambda(cutoff: usize, budget: &PrivacyBudget) -> Result<f64> {
    check_positive_count("cutoff T", cutoff)?;
    let t = cutoff as f64;
    let log_term = (2.0 / budget.delta).ln();
    Ok(((2.0 * t * (budget.epsilon + log_term)).sqrt() + (2.0 * t * log_term).sqrt())
        / budget.epsilon)
}

/// Stability threshold `w = 3 λ log(2(ell + T)/δ)`.
pub fn svt_threshold_w(lambda: f64, ell: usize, cutoff: usize, delta: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(delta > 0.0) {
        return param_err("lambda and delta must be positive");
    }
    check_positive_count("ell", ell)?;
    check_positive_count("cutoff T", cutoff)?;
    Ok(3.0 * lambda * (2.0 * (ell + cutoff) as f64 / delta).ln())
}

/// ρ-zCDP implies (ρ + 2 sqrt(ρ log(1/δ)), δ)-DP.
pub fn zcdp_to_dp(rho: f64, delta: f64) -> f64 {
    rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt()
}

/// ε-DP implies (ε²/2)-zCDP.
pub fn dp_to_zcdp(epsilon: f64) -> f64 {
    epsilon * epsilon / 2.0
}

/// zCDP cost of `ell` sensitivity-1 Gaussian releases at noise level `sigma`.
pub fn gaussian_composition_rho(ell: usize, sigma: f64) -> f64 {
    ell as f64 / (2.0 * sigma * sigma)
}

/// Realized (ε) loss after `queries_answered` Gaussian releases.
pub fn ex_post_epsilon(queries_answered: usize, sigma: f64, delta: f64) -> f64 {
    zcdp_to_dp(gaussian_composition_rho(queries_answered, sigma), delta)
}
