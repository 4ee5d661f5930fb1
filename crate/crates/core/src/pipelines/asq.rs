//! Active student queries: the public pool is streamed through the
//! disagreement-based learner and only requested points cost privacy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::active::{run_active, SurrogateLearner, SurrogateSlack};
use super::psq::{build_labeler, Mechanism};
use super::PipelineReport;
use crate::aggregation::PseudoLabel;
use crate::dp::PrivacyBudget;
use crate::error::{param_err, Result};
use crate::learners::{accuracy, train_ensemble, Dataset, Ensemble, LinearHypothesis, TrainerConfig};
use crate::seed::{rng_from_seed, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsqMechanism {
    #[default]
    Gaussian,
    Noiseless,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsqConfig {
    pub k: usize,
    /// Maximum number of label requests ℓ.
    pub query_budget: usize,
    pub budget: PrivacyBudget,
    /// Failure probability γ of the elimination bound.
    pub gamma: f64,
    #[serde(default)]
    pub mechanism: AsqMechanism,
    #[serde(default)]
    pub slack: SurrogateSlack,
    #[serde(default)]
    pub trainer: TrainerConfig,
}

impl AsqConfig {
    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.query_budget == 0 {
            return param_err("k and the query budget must be at least 1");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return param_err("gamma must lie in (0, 1)");
        }
        Ok(())
    }
}

pub fn pate_asq(
    teacher_data: &Dataset,
    student_pool: &Dataset,
    test_data: &Dataset,
    config: &AsqConfig,
    rng: &mut SeededRng,
) -> Result<(LinearHypothesis, PipelineReport)> {
    config.validate()?;
    if teacher_data.len() < config.k {
        return param_err(format!(
            "{} teacher examples cannot form {} teachers",
            teacher_data.len(),
            config.k
        ));
    }
    let ensemble = train_ensemble(teacher_data, config.k, &config.trainer, rng)?;
    pate_asq_with_ensemble(&ensemble, student_pool, test_data, config, rng)
}

pub fn pate_asq_with_ensemble(
    ensemble: &Ensemble<LinearHypothesis>,
    student_pool: &Dataset,
    test_data: &Dataset,
    config: &AsqConfig,
    rng: &mut SeededRng,
) -> Result<(LinearHypothesis, PipelineReport)> {
    config.validate()?;
    if student_pool.is_empty() || test_data.is_empty() {
        return param_err("student pool and test data must be nonempty");
    }
    let mechanism = match config.mechanism {
        AsqMechanism::Gaussian => Mechanism::Gaussian,
        AsqMechanism::Noiseless => Mechanism::Noiseless,
    };
    let mut labeler = build_labeler(mechanism, config.query_budget, &config.budget, rng_from_seed(rng.random()))?;
    let dim = ensemble
        .members()
        .iter()
        .map(|h| h.weights.len())
        .max()
        .unwrap_or(0)
        .max(student_pool.dim());
    let mut learner = SurrogateLearner::new(dim, config.trainer, config.slack)?;
    let stream = student_pool.iter().map(|e| e.features.clone());
    run_active(&mut learner, stream, Some(config.query_budget), |x| {
        match labeler.answer(ensemble.vote_count(x))? {
            PseudoLabel::Released(y) => Ok(y),
            PseudoLabel::Bot => unreachable!("Gaussian and noiseless sessions always release"),
        }
    })?;
    let student = learner.into_hypothesis();
    let report = PipelineReport {
        queries: labeler.answered(),
        bots: 0,
        unanswered: 0,
        halted: false,
        epsilon: if mechanism == Mechanism::Noiseless {
            f64::INFINITY
        } else {
            config.budget.epsilon
        },
        delta: config.budget.delta,
        eps_ex_post: labeler.privacy_report().epsilon,
        accuracy: accuracy(&student, test_data)?,
    };
    Ok((student, report))
}
