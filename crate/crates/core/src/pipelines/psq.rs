//! Passive student queries: every public point is sent to the aggregation
//! session and the student is trained on all resulting pseudo-labels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PipelineReport;
use crate::aggregation::{GaussianSession, NoiselessLabeler, PseudoLabel, SvtSession, VoteLabeler};
use crate::dp::PrivacyBudget;
use crate::error::{param_err, Result, SessionError};
use crate::learners::{accuracy, train_ensemble, train_erm, Dataset, Ensemble, LinearHypothesis, TrainerConfig};
use crate::seed::{rng_from_seed, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    /// Gaussian noise calibrated for one query per public point.
    Gaussian,
    /// Stable release with at most `cutoff` ⊥ answers.
    Svt { cutoff: usize },
    /// Exact majority; not private.
    Noiseless,
}

/// Replacement label for ⊥ answers and points left after a halt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BotPolicy {
    #[default]
    Zero,
    CoinFlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsqConfig {
    pub k: usize,
    pub mechanism: Mechanism,
    pub budget: PrivacyBudget,
    #[serde(default)]
    pub bot_policy: BotPolicy,
    #[serde(default)]
    pub trainer: TrainerConfig,
}

pub(crate) fn build_labeler(
    mechanism: Mechanism,
    ell: usize,
    budget: &PrivacyBudget,
    rng: SeededRng,
) -> Result<Box<dyn VoteLabeler + Send>> {
    Ok(match mechanism {
        Mechanism::Gaussian => Box::new(GaussianSession::new(ell, budget, rng)?),
        Mechanism::Svt { cutoff } => Box::new(SvtSession::new(cutoff, ell, budget, rng)?),
        Mechanism::Noiseless => Box::new(NoiselessLabeler::new(Some(ell))),
    })
}

/// Pseudo-labels for a public pool, in stream order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoLabeling {
    /// Raw session answers; `None` for points after a halt.
    pub answers: Vec<Option<PseudoLabel>>,
    /// Labels with ⊥ and unanswered points filled in by the policy.
    pub labels: Vec<u8>,
    pub bots: usize,
    pub unanswered: usize,
    pub halted: bool,
}

/// Drives `labeler` over `pool` in order. A halted session leaves the rest
/// of the pool to the ⊥ policy.
pub fn pseudo_label(
    ensemble: &Ensemble<LinearHypothesis>,
    pool: &Dataset,
    labeler: &mut dyn VoteLabeler,
    policy: BotPolicy,
    rng: &mut impl Rng,
) -> Result<PseudoLabeling> {
    let mut out = PseudoLabeling {
        answers: Vec::with_capacity(pool.len()),
        labels: Vec::with_capacity(pool.len()),
        bots: 0,
        unanswered: 0,
        halted: false,
    };
    let fill = |rng: &mut dyn rand::RngCore| match policy {
        BotPolicy::Zero => 0,
        BotPolicy::CoinFlip => rng.random_range(0..2u8),
    };
    for e in pool {
        if out.halted {
            out.answers.push(None);
            out.labels.push(fill(rng));
            out.unanswered += 1;
            continue;
        }
        match labeler.answer(ensemble.vote_count(e)) {
            Ok(PseudoLabel::Released(y)) => {
                out.answers.push(Some(PseudoLabel::Released(y)));
                out.labels.push(y);
            }
            Ok(PseudoLabel::Bot) => {
                out.answers.push(Some(PseudoLabel::Bot));
                out.labels.push(fill(rng));
                out.bots += 1;
            }
            Err(SessionError::Halted { .. }) => {
                log::debug!("aggregation session halted after {} answers", labeler.answered());
                out.halted = true;
                out.answers.push(None);
                out.labels.push(fill(rng));
                out.unanswered += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Splits the teacher data into `k` parts, trains the ensemble and runs
/// [`pate_psq_with_ensemble`].
pub fn pate_psq(
    teacher_data: &Dataset,
    student_pool: &Dataset,
    test_data: &Dataset,
    config: &PsqConfig,
    rng: &mut SeededRng,
) -> Result<(LinearHypothesis, PipelineReport)> {
    if teacher_data.len() < config.k {
        return param_err(format!(
            "{} teacher examples cannot form {} teachers",
            teacher_data.len(),
            config.k
        ));
    }
    let ensemble = train_ensemble(teacher_data, config.k, &config.trainer, rng)?;
    pate_psq_with_ensemble(&ensemble, student_pool, test_data, config, rng)
}

pub fn pate_psq_with_ensemble(
    ensemble: &Ensemble<LinearHypothesis>,
    student_pool: &Dataset,
    test_data: &Dataset,
    config: &PsqConfig,
    rng: &mut SeededRng,
) -> Result<(LinearHypothesis, PipelineReport)> {
    if student_pool.is_empty() || test_data.is_empty() {
        return param_err("student pool and test data must be nonempty");
    }
    let session_rng = rng_from_seed(rng.random());
    let mut labeler = build_labeler(config.mechanism, student_pool.len(), &config.budget, session_rng)?;
    let labeling = pseudo_label(ensemble, student_pool, labeler.as_mut(), config.bot_policy, rng)?;
    let student = train_erm(&student_pool.relabeled(&labeling.labels)?, &config.trainer)?;
    let privacy = labeler.privacy_report();
    let report = PipelineReport {
        queries: labeler.answered(),
        bots: labeling.bots,
        unanswered: labeling.unanswered,
        halted: labeling.halted,
        epsilon: if config.mechanism == Mechanism::Noiseless {
            f64::INFINITY
        } else {
            config.budget.epsilon
        },
        delta: config.budget.delta,
        eps_ex_post: privacy.epsilon,
        accuracy: accuracy(&student, test_data)?,
    };
    Ok((student, report))
}
