//! The split-and-repeat experiment protocol: per trial a fresh random
//! teacher/student/test split, one pipeline run, one trial record.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::libsvm::{parse_libsvm_with, LabelMap};
use super::report::{SummaryReport, TrialReport};
use crate::dp::PrivacyBudget;
use crate::error::{Error, Result};
use crate::learners::{empirical_error, partition_indices, train_erm, Dataset, TrainerConfig};
use crate::pipelines::{
    compute_svt_params, pate_asq, pate_psq, AsqConfig, AsqMechanism, BotPolicy, Mechanism, PipelineReport,
    PsqConfig, SurrogateSlack,
};
use crate::seed::{derive_seed, rng_from_seed, SeededRng};
use crate::synthdata::{GeneratorSpec, GENERATOR_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PsqGaussian,
    PsqSvt,
    Asq,
    PsqNoPrivacy,
    AsqNoPrivacy,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::PsqGaussian,
        Method::PsqSvt,
        Method::Asq,
        Method::PsqNoPrivacy,
        Method::AsqNoPrivacy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::PsqGaussian => "psq-gaussian",
            Method::PsqSvt => "psq-svt",
            Method::Asq => "asq",
            Method::PsqNoPrivacy => "psq-no-privacy",
            Method::AsqNoPrivacy => "asq-no-privacy",
        }
    }

    pub fn is_active(&self) -> bool {
        matches!(self, Method::Asq | Method::AsqNoPrivacy)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Ensemble size: fixed, or one teacher per `n` teacher examples (rounded up).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KPolicy {
    Explicit(usize),
    PerTeacherSize(usize),
}

impl Default for KPolicy {
    fn default() -> Self {
        KPolicy::PerTeacherSize(100)
    }
}

impl KPolicy {
    pub fn resolve(&self, teacher_size: usize) -> usize {
        match *self {
            KPolicy::Explicit(k) => k,
            KPolicy::PerTeacherSize(per) => teacher_size.div_ceil(per.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvtOptions {
    /// Failure probability β in the cutoff formula.
    pub beta: f64,
    /// Fraction of teacher data held out to estimate one teacher's error.
    pub holdout: f64,
}

impl Default for SvtOptions {
    fn default() -> Self {
        SvtOptions { beta: 0.05, holdout: 0.1 }
    }
}

fn default_trials() -> usize {
    30
}
fn default_fractions() -> [f64; 3] {
    [0.8, 0.02, 0.18]
}
fn default_query_fraction() -> f64 {
    0.3
}
fn default_gamma() -> f64 {
    0.05
}
fn default_samples() -> usize {
    5000
}

/// One experiment: dataset, method, budget and protocol knobs. Fields other
/// than `dataset`, `method` and `epsilon` have defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// A LIBSVM file path or a generator name.
    pub dataset: String,
    /// Name used in reports; defaults to the file stem or generator name.
    #[serde(default)]
    pub name: Option<String>,
    pub method: Method,
    pub epsilon: f64,
    /// Defaults to 1 / (teacher split size).
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Teacher, student and test fractions.
    #[serde(default = "default_fractions")]
    pub fractions: [f64; 3],
    #[serde(default)]
    pub k: KPolicy,
    /// Active query budget as a fraction of the student pool.
    #[serde(default = "default_query_fraction")]
    pub query_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub label_map: LabelMap,
    /// Parameters when `dataset` names a generator.
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    /// Sample size drawn from a generator.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub svt: SvtOptions,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub bot_policy: BotPolicy,
    #[serde(default)]
    pub slack: SurrogateSlack,
    /// Record wall-clock time per trial; off keeps reports byte-stable.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<String>, method: Method, epsilon: f64) -> Self {
        ExperimentConfig {
            dataset: dataset.into(),
            name: None,
            method,
            epsilon,
            delta: None,
            trials: default_trials(),
            fractions: default_fractions(),
            k: KPolicy::default(),
            query_fraction: default_query_fraction(),
            seed: 0,
            label_map: LabelMap::Standard,
            generator: None,
            samples: default_samples(),
            trainer: TrainerConfig::default(),
            svt: SvtOptions::default(),
            gamma: default_gamma(),
            bot_policy: BotPolicy::Zero,
            slack: SurrogateSlack::OneMistake,
            timing: false,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.fractions.iter().any(|f| !(*f > 0.0)) {
            return bad(format!("split fractions must be positive: {:?}", self.fractions));
        }
        if (self.fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("split fractions must sum to 1: {:?}", self.fractions));
        }
        if !(self.query_fraction > 0.0 && self.query_fraction <= 1.0) {
            return bad("query fraction must lie in (0, 1]".into());
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return bad("delta must lie in (0, 1)".into());
            }
        }
        if !(self.svt.holdout > 0.0 && self.svt.holdout < 1.0) {
            return bad("svt holdout must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// Report name for the dataset.
    pub fn dataset_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        Path::new(&self.dataset)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.dataset.clone())
    }

    /// Loads the file, or samples the named generator with the master seed.
    pub fn load_dataset(&self) -> Result<Dataset> {
        let path = PathBuf::from(&self.dataset);
        if path.exists() {
            return parse_libsvm_with(&path, self.label_map);
        }
        if GENERATOR_NAMES.contains(&self.dataset.as_str()) || self.generator.is_some() {
            let spec = match &self.generator {
                Some(s) => s.clone(),
                None => GeneratorSpec::by_name(&self.dataset)?,
            };
            let generator = spec.build(self.seed)?;
            return generator.dataset(self.samples, &mut rng_from_seed(derive_seed(self.seed, u64::MAX)));
        }
        Err(Error::Config(format!(
            "dataset `{}` is neither a readable file nor a generator ({})",
            self.dataset,
            GENERATOR_NAMES.join(", ")
        )))
    }
}

/// Split sizes: teacher `⌊f₀n⌋`, student `⌈f₁n⌉`, test the remainder.
pub fn split_sizes(n: usize, fractions: [f64; 3]) -> Result<(usize, usize, usize)> {
    let teacher = (fractions[0] * n as f64).floor() as usize;
    let student = (fractions[1] * n as f64).ceil() as usize;
    match n.checked_sub(teacher + student) {
        Some(test) if teacher > 0 && student > 0 && test > 0 => Ok((teacher, student, test)),
        _ => Err(Error::Config(format!(
            "fractions {fractions:?} of {n} examples leave an empty split"
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub teacher: Dataset,
    /// Student pool with labels removed.
    pub student: Dataset,
    /// The student pool's true labels, kept for evaluation only.
    pub student_labels: Vec<Option<u8>>,
    pub test: Dataset,
}

pub fn split_protocol(data: &Dataset, fractions: [f64; 3], rng: &mut impl Rng) -> Result<Split> {
    if fractions.iter().any(|f| !(*f >= 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("invalid split fractions {fractions:?}")));
    }
    let (t, s, _) = split_sizes(data.len(), fractions)?;
    let mut idx: Vec<usize> = (0..data.len()).collect();
    rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), rng);
    let student_full = data.subset(&idx[t..t + s]);
    Ok(Split {
        teacher: data.subset(&idx[..t]),
        student_labels: student_full.labels(),
        student: student_full.without_labels(),
        test: data.subset(&idx[t + s..]),
    })
}

/// Estimated error of a single teacher: train on `teacher_size / k` points
/// of the non-held-out part, evaluate on the holdout.
fn estimate_teacher_error(
    teacher: &Dataset,
    k: usize,
    holdout: f64,
    trainer: &TrainerConfig,
    rng: &mut SeededRng,
) -> Result<(Dataset, f64)> {
    let n = teacher.len();
    let h = ((holdout * n as f64).round() as usize).clamp(1, n.saturating_sub(k).max(1));
    let mut idx: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), rng);
    let (held, rest) = idx.split_at(h);
    let rest = teacher.subset(rest);
    if rest.len() < k {
        return Err(Error::Config(format!("{} teacher examples left for {k} teachers", rest.len())));
    }
    let parts = partition_indices(rest.len(), k, rng)?;
    let one = train_erm(&rest.subset(&parts[0]), trainer)?;
    let err = empirical_error(&one, &teacher.subset(held))?;
    Ok((rest, err))
}

pub fn run_trial(config: &ExperimentConfig, data: &Dataset, trial: usize) -> Result<TrialReport> {
    let seed = derive_seed(config.seed, trial as u64);
    let wrap = |e: Error| Error::Trial {
        trial,
        seed,
        source: Box::new(e),
    };
    let start = Instant::now();
    let mut rng = rng_from_seed(seed);
    let split = split_protocol(data, config.fractions, &mut rng).map_err(wrap)?;
    let delta = config.delta.unwrap_or(1.0 / split.teacher.len() as f64);
    let budget = PrivacyBudget::new(config.epsilon, delta).map_err(wrap)?;
    let k = config.k.resolve(split.teacher.len());
    let report = run_method(config, &split, k, budget, &mut rng).map_err(wrap)?;
    let wall_ms = if config.timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    Ok(TrialReport {
        dataset: config.dataset_name(),
        method: config.method.name().to_string(),
        epsilon: report.epsilon,
        delta: report.delta,
        trial,
        seed,
        queries: report.queries,
        bots: report.bots + report.unanswered,
        eps_ex_post: report.eps_ex_post,
        accuracy: report.accuracy,
        wall_ms,
    })
}

fn run_method(
    config: &ExperimentConfig,
    split: &Split,
    k: usize,
    budget: PrivacyBudget,
    rng: &mut SeededRng,
) -> Result<PipelineReport> {
    let psq = |mechanism| PsqConfig {
        k,
        mechanism,
        budget,
        bot_policy: config.bot_policy,
        trainer: config.trainer,
    };
    let asq = |mechanism| AsqConfig {
        k,
        query_budget: ((config.query_fraction * split.student.len() as f64).round() as usize).max(1),
        budget,
        gamma: config.gamma,
        mechanism,
        slack: config.slack,
        trainer: config.trainer,
    };
    let (s, t) = (&split.student, &split.test);
    let report = match config.method {
        Method::PsqGaussian => pate_psq(&split.teacher, s, t, &psq(Mechanism::Gaussian), rng)?.1,
        Method::PsqNoPrivacy => pate_psq(&split.teacher, s, t, &psq(Mechanism::Noiseless), rng)?.1,
        Method::PsqSvt => {
            let (teachers, err) =
                estimate_teacher_error(&split.teacher, k, config.svt.holdout, &config.trainer, rng)?;
            let cutoff = compute_svt_params(s.len(), err, config.svt.beta, &budget)?.cutoff;
            log::info!("estimated teacher error {err:.4}, cutoff T = {cutoff}");
            pate_psq(&teachers, s, t, &psq(Mechanism::Svt { cutoff }), rng)?.1
        }
        Method::Asq => pate_asq(&split.teacher, s, t, &asq(AsqMechanism::Gaussian), rng)?.1,
        Method::AsqNoPrivacy => pate_asq(&split.teacher, s, t, &asq(AsqMechanism::Noiseless), rng)?.1,
    };
    Ok(report)
}

/// Trial records in trial order plus their summary.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub summary: SummaryReport,
    pub trials: Vec<TrialReport>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let data = config.load_dataset()?;
    run_experiment_on(config, &data)
}

/// Runs every trial on an already loaded dataset, in parallel.
pub fn run_experiment_on(config: &ExperimentConfig, data: &Dataset) -> Result<ExperimentOutput> {
    config.validate()?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, data, t))
        .collect::<Result<Vec<_>>>()?;
    let summary = SummaryReport::from_trials(&trials)?;
    Ok(ExperimentOutput { summary, trials })
}
