//! Student training from privately aggregated teacher votes: passive
//! (label every public point) and active (label only where needed).

pub mod active;
pub mod asq;
pub mod params;
pub mod psq;

pub use active::{run_active, ActiveLearner, ActiveRun, SurrogateLearner, SurrogateSlack, VersionSpaceLearner};
pub use asq::{pate_asq, AsqConfig, AsqMechanism};
pub use params::{
    compute_k_for_gaussian, compute_svt_params, gamma_schedule, svt_works_params, EliminationBound, SvtParams,
};
pub use psq::{pate_psq, pate_psq_with_ensemble, pseudo_label, BotPolicy, Mechanism, PseudoLabeling, PsqConfig};

use serde::{Deserialize, Serialize};

/// Outcome of one pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    /// Queries answered by the aggregation session, ⊥ answers included.
    pub queries: usize,
    /// ⊥ answers.
    pub bots: usize,
    /// Student points left unanswered after the session halted.
    pub unanswered: usize,
    pub halted: bool,
    /// Budgeted ε; infinite for non-private aggregation.
    pub epsilon: f64,
    pub delta: f64,
    pub eps_ex_post: f64,
    /// Student accuracy on the test split.
    pub accuracy: f64,
}
