//! Seeded synthetic distributions: realizable and bounded-noise linear data,
//! a one-dimensional Tsybakov family, and the two voting fixtures.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::VoteCount;
use crate::error::{param_err, Result};
use crate::learners::{
    erm_finite, erm_threshold, train_erm, Dataset, Example, FiniteHypothesisClass, FiniteMember,
    LearningProblem, LinearHypothesis, Predictor, SparseVector, Threshold, TieBreak, TrainerConfig,
};
use crate::seed::{rng_from_seed, SeededRng};

/// Labels `1(w*·x ≥ 0)` on `x` uniform in `[−1, 1]^d`, each flipped
/// independently with probability `flip`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGenerator {
    h_star: LinearHypothesis,
    flip: f64,
}

impl LinearGenerator {
    /// Draws `w* ~ N(0, I_d)` from `rng`.
    pub fn random(d: usize, flip: f64, rng: &mut impl Rng) -> Result<Self> {
        if d == 0 {
            return param_err("dimension must be at least 1");
        }
        let weights = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        Self::new(LinearHypothesis { weights, bias: 0.0 }, flip)
    }

    pub fn new(h_star: LinearHypothesis, flip: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&flip) {
            return param_err(format!("flip rate must lie in [0, 1/2), got {flip}"));
        }
        Ok(LinearGenerator { h_star, flip })
    }

    pub fn h_star(&self) -> &LinearHypothesis {
        &self.h_star
    }

    pub fn dim(&self) -> usize {
        self.h_star.weights.len()
    }

    /// Bayes error, equal to the flip rate.
    pub fn bayes_error(&self) -> f64 {
        self.flip
    }

    pub fn sample_features(&self, n: usize, rng: &mut impl Rng) -> Vec<SparseVector> {
        let d = self.dim();
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                SparseVector::from_dense(&x)
            })
            .collect()
    }

    /// Clean labels are computed for the whole sample before any flip is
    /// drawn, so `flip = 0` reproduces the realizable sample exactly.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Dataset {
        let xs = self.sample_features(n, rng);
        let examples = xs
            .into_iter()
            .map(|x| {
                let y = self.h_star.predict(&x);
                Example::labeled(x, y)
            })
            .collect::<Vec<_>>();
        let examples = if self.flip > 0.0 {
            examples
                .into_iter()
                .map(|mut e| {
                    if rng.random::<f64>() < self.flip {
                        e.label = e.label.map(|y| 1 - y);
                    }
                    e
                })
                .collect()
        } else {
            examples
        };
        Dataset::with_dim(examples, self.dim())
    }
}

/// A sample together with the generator that produced it.
#[derive(Debug, Clone)]
pub struct LinearSample {
    pub data: Dataset,
    pub generator: LinearGenerator,
}

impl LinearSample {
    pub fn h_star(&self) -> &LinearHypothesis {
        self.generator.h_star()
    }
}

pub fn gen_realizable(d: usize, n: usize, rng: &mut impl Rng) -> Result<LinearSample> {
    gen_massart(d, n, 0.0, rng)
}

pub fn gen_massart(d: usize, n: usize, flip: f64, rng: &mut impl Rng) -> Result<LinearSample> {
    if n == 0 {
        return param_err("sample size must be at least 1");
    }
    let generator = LinearGenerator::random(d, flip, rng)?;
    let data = generator.sample(n, rng);
    Ok(LinearSample { data, generator })
}

/// Mean excess risk of exact threshold ERM on `n` samples over `reps`
/// independent draws.
pub fn threshold_erm_excess_risk(g: &TncGenerator, n: usize, reps: usize, seed: u64) -> Result<f64> {
    if n == 0 || reps == 0 {
        return param_err("n and reps must be positive");
    }
    let risks = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = crate::seed::child_rng(seed, r as u64);
            erm_threshold(&g.sample(n, &mut rng)).map(|t| g.excess_risk(t.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(risks.iter().sum::<f64>() / reps as f64)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// One-dimensional Tsybakov family on `x ~ U[0, 1]` with `h*(x) = 1(x > 1/2)`
/// and `|r(x) − 1/2| = min(1/2, c·|x − 1/2|^((1−τ)/τ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TncGenerator {
    tau: f64,
    c: f64,
}

impl TncGenerator {
    pub const DEFAULT_C: f64 = 0.5;

    pub fn new(tau: f64) -> Result<Self> {
        Self::with_constant(tau, Self::DEFAULT_C)
    }

    pub fn with_constant(tau: f64, c: f64) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0) {
            return param_err(format!("tau must lie in (0, 1], got {tau}"));
        }
        if !(c > 0.0) {
            return param_err("margin constant must be positive");
        }
        Ok(TncGenerator { tau, c })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn exponent(&self) -> f64 {
        (1.0 - self.tau) / self.tau
    }

    /// Distance of `P(y = 1 | x)` from 1/2.
    pub fn margin(&self, x: f64) -> f64 {
        let u = (x - 0.5).abs();
        let p = self.exponent();
        let raw = if p == 0.0 { self.c } else { self.c * u.powf(p) };
        raw.min(0.5)
    }

    /// `P(y = 1 | x)`.
    pub fn regression(&self, x: f64) -> f64 {
        if x > 0.5 {
            0.5 + self.margin(x)
        } else {
            0.5 - self.margin(x)
        }
    }

    pub fn h_star(&self) -> Threshold {
        Threshold(0.5)
    }

    /// `C` in `P(|r(x) − 1/2| ≤ t) ≤ C t^(τ/(1−τ))`; infinite at τ = 1 where
    /// the margin is bounded below and the condition holds for small `t` only.
    pub fn tail_constant(&self) -> f64 {
        if self.tau == 1.0 {
            f64::INFINITY
        } else {
            2.0 * self.c.powf(-self.tau / (1.0 - self.tau))
        }
    }

    /// Exact `P(|r(x) − 1/2| ≤ t)`.
    pub fn margin_cdf(&self, t: f64) -> f64 {
        if t >= 0.5 || t >= self.c.min(0.5) && self.tau == 1.0 {
            return 1.0;
        }
        if self.tau == 1.0 {
            return 0.0;
        }
        (2.0 * (t / self.c).powf(1.0 / self.exponent())).min(1.0)
    }

    /// `Err(1(x > t)) − Err(h*)`.
    pub fn excess_risk(&self, threshold: f64) -> f64 {
        let a = (threshold.clamp(0.0, 1.0) - 0.5).abs();
        let p = self.exponent();
        if p == 0.0 {
            return 2.0 * self.c.min(0.5) * a;
        }
        // c·u^p reaches the clamp at u0.
        let u0 = (0.5 / self.c).powf(1.0 / p);
        let partial = |v: f64| 2.0 * self.c * v.powf(p + 1.0) / (p + 1.0);
        if a <= u0 {
            partial(a)
        } else {
            partial(u0) + (a - u0)
        }
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<(f64, u8)> {
        (0..n)
            .map(|_| {
                let x: f64 = rng.random();
                let y = u8::from(rng.random::<f64>() < self.regression(x));
                (x, y)
            })
            .collect()
    }
}

pub fn points_to_dataset(points: &[(f64, u8)]) -> Dataset {
    Dataset::with_dim(
        points
            .iter()
            .map(|&(x, y)| Example::labeled(SparseVector::from_dense(&[x]), y))
            .collect(),
        1,
    )
}

pub fn gen_tnc(tau: f64, n: usize, rng: &mut impl Rng) -> Result<(Vec<(f64, u8)>, TncGenerator)> {
    let g = TncGenerator::new(tau)?;
    Ok((g.sample(n, rng), g))
}

/// The four-point domain where every label is 1 and each of three
/// hypotheses errs on half the domain, yet their majority errs on 3/4.
#[derive(Debug, Clone, PartialEq)]
pub struct VotingFails {
    pub class: FiniteHypothesisClass,
    pub labels: Vec<u8>,
}

pub fn gen_voting_fails() -> VotingFails {
    let class = FiniteHypothesisClass::new(vec![
        vec![1, 1, 0, 0],
        vec![1, 0, 1, 0],
        vec![1, 0, 0, 1],
    ])
    .expect("fixed table is well formed");
    VotingFails {
        class,
        labels: vec![1; 4],
    }
}

impl VotingFails {
    pub fn domain_size(&self) -> usize {
        self.labels.len()
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<(usize, u8)> {
        (0..n)
            .map(|_| {
                let x = rng.random_range(0..self.domain_size());
                (x, self.labels[x])
            })
            .collect()
    }

    /// Error under the uniform marginal.
    pub fn error<P: Predictor<usize>>(&self, h: &P) -> f64 {
        let wrong = (0..self.domain_size())
            .filter(|x| h.predict(x) != self.labels[*x])
            .count();
        wrong as f64 / self.domain_size() as f64
    }
}

/// Teachers simulated as independent predictors that are correct at each
/// point with probability `1/2 + ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingWinsGenerator {
    xi: f64,
    labels: Vec<u8>,
}

pub fn gen_voting_wins(xi: f64, domain_size: usize, rng: &mut impl Rng) -> Result<VotingWinsGenerator> {
    if !(xi > 0.0 && xi < 0.5) {
        return param_err(format!("xi must lie in (0, 1/2), got {xi}"));
    }
    if domain_size == 0 {
        return param_err("domain must be nonempty");
    }
    let labels = (0..domain_size).map(|_| rng.random_range(0..2)).collect();
    Ok(VotingWinsGenerator { xi, labels })
}

impl VotingWinsGenerator {
    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn domain_size(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, x: usize) -> u8 {
        self.labels[x]
    }

    /// One teacher's prediction at `x`.
    pub fn teacher_prediction(&self, x: usize, rng: &mut impl Rng) -> u8 {
        let y = self.labels[x];
        if rng.random::<f64>() < 0.5 + self.xi {
            y
        } else {
            1 - y
        }
    }

    /// Votes of `k` fresh teachers at `x`.
    pub fn votes(&self, x: usize, k: usize, rng: &mut impl Rng) -> VoteCount {
        let ones = (0..k).filter(|_| self.teacher_prediction(x, rng) == 1).count();
        VoteCount::new(ones, k).expect("ones never exceeds k")
    }

    /// Hoeffding bound on the aggregate error, `e^{−2Kξ²}`.
    pub fn hoeffding_bound(&self, k: usize) -> f64 {
        (-2.0 * k as f64 * self.xi * self.xi).exp()
    }

    /// Fraction of `points` uniform draws where the `k`-teacher majority errs.
    pub fn aggregate_error(&self, k: usize, points: usize, rng: &mut impl Rng) -> f64 {
        let wrong = (0..points)
            .filter(|_| {
                let x = rng.random_range(0..self.domain_size());
                self.votes(x, k, rng).majority() != self.labels[x]
            })
            .count();
        wrong as f64 / points as f64
    }
}

/// Named generator parameters, as used by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    Realizable { dim: usize },
    Massart { dim: usize, flip: f64 },
    Tnc { tau: f64, #[serde(default = "default_tnc_c")] c: f64 },
    VotingFails,
    VotingWins { xi: f64, domain_size: usize },
}

fn default_tnc_c() -> f64 {
    TncGenerator::DEFAULT_C
}

pub const GENERATOR_NAMES: [&str; 5] = ["realizable", "massart", "tnc", "voting-fails", "voting-wins"];

impl GeneratorSpec {
    /// Default parameters for a generator name.
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "realizable" => GeneratorSpec::Realizable { dim: 5 },
            "massart" => GeneratorSpec::Massart { dim: 5, flip: 0.1 },
            "tnc" => GeneratorSpec::Tnc { tau: 1.0, c: TncGenerator::DEFAULT_C },
            "voting-fails" => GeneratorSpec::VotingFails,
            "voting-wins" => GeneratorSpec::VotingWins { xi: 0.1, domain_size: 1000 },
            other => {
                return Err(crate::Error::Config(format!(
                    "unknown generator `{other}` (expected one of {})",
                    GENERATOR_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn build(&self, seed: u64) -> Result<DataGenerator> {
        let mut rng = rng_from_seed(seed);
        Ok(match *self {
            GeneratorSpec::Realizable { dim } => {
                DataGenerator::Realizable(LinearGenerator::random(dim, 0.0, &mut rng)?)
            }
            GeneratorSpec::Massart { dim, flip } => {
                DataGenerator::Massart(LinearGenerator::random(dim, flip, &mut rng)?)
            }
            GeneratorSpec::Tnc { tau, c } => DataGenerator::Tnc(TncGenerator::with_constant(tau, c)?),
            GeneratorSpec::VotingFails => DataGenerator::VotingFails(gen_voting_fails()),
            GeneratorSpec::VotingWins { xi, domain_size } => {
                DataGenerator::VotingWins(gen_voting_wins(xi, domain_size, &mut rng)?)
            }
        })
    }
}

#[derive(Debug, Clone)]
pub enum DataGenerator {
    Realizable(LinearGenerator),
    Massart(LinearGenerator),
    Tnc(TncGenerator),
    VotingFails(VotingFails),
    VotingWins(VotingWinsGenerator),
}

impl DataGenerator {
    /// A labeled sample as a sparse dataset; the voting fixtures use the
    /// point index as a single feature.
    pub fn dataset(&self, n: usize, rng: &mut impl Rng) -> Result<Dataset> {
        Ok(match self {
            DataGenerator::Realizable(g) | DataGenerator::Massart(g) => g.sample(n, rng),
            DataGenerator::Tnc(g) => points_to_dataset(&g.sample(n, rng)),
            DataGenerator::VotingFails(g) => {
                let pts: Vec<(f64, u8)> = g.sample(n, rng).into_iter().map(|(x, y)| (x as f64, y)).collect();
                points_to_dataset(&pts)
            }
            DataGenerator::VotingWins(g) => {
                let pts: Vec<(f64, u8)> = (0..n)
                    .map(|_| {
                        let x = rng.random_range(0..g.domain_size());
                        (x as f64, g.label(x))
                    })
                    .collect();
                points_to_dataset(&pts)
            }
        })
    }

    /// Bayes error where it is known in closed form.
    pub fn bayes_error(&self) -> Option<f64> {
        match self {
            DataGenerator::Realizable(_) => Some(0.0),
            DataGenerator::Massart(g) => Some(g.bayes_error()),
            DataGenerator::Tnc(g) => {
                // ∫ (1/2 − margin) over [0, 1], by midpoint quadrature.
                let n = 100_000;
                Some((0..n).map(|i| 0.5 - g.margin((i as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64)
            }
            DataGenerator::VotingFails(_) => Some(0.0),
            DataGenerator::VotingWins(_) => Some(0.0),
        }
    }
}

/// Teachers are linear ERMs on fresh samples from a linear generator.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub generator: LinearGenerator,
    pub private_size: usize,
    pub trainer: TrainerConfig,
}

impl LearningProblem for LinearProblem {
    type Input = SparseVector;
    type Model = LinearHypothesis;

    fn sample_inputs(&self, count: usize, rng: &mut SeededRng) -> Vec<SparseVector> {
        self.generator.sample_features(count, rng)
    }

    fn train_teacher(&self, n: usize, rng: &mut SeededRng) -> Result<LinearHypothesis> {
        train_erm(&self.generator.sample(n, rng), &self.trainer)
    }

    fn reference_label(&self, x: &SparseVector) -> u8 {
        self.generator.h_star().predict(x)
    }

    fn private_size(&self) -> usize {
        self.private_size
    }
}

/// Teachers are exact threshold ERMs on fresh Tsybakov samples.
#[derive(Debug, Clone)]
pub struct ThresholdProblem {
    pub generator: TncGenerator,
    pub private_size: usize,
}

impl LearningProblem for ThresholdProblem {
    type Input = f64;
    type Model = Threshold;

    fn sample_inputs(&self, count: usize, rng: &mut SeededRng) -> Vec<f64> {
        (0..count).map(|_| rng.random()).collect()
    }

    fn train_teacher(&self, n: usize, rng: &mut SeededRng) -> Result<Threshold> {
        erm_threshold(&self.generator.sample(n, rng))
    }

    fn reference_label(&self, x: &f64) -> u8 {
        self.generator.h_star().predict(x)
    }

    fn private_size(&self) -> usize {
        self.private_size
    }
}

/// Teachers are ERMs over the three-member class with uniform tie-breaking.
#[derive(Debug, Clone)]
pub struct VotingFailsProblem {
    pub fixture: VotingFails,
    pub private_size: usize,
}

impl LearningProblem for VotingFailsProblem {
    type Input = usize;
    type Model = FiniteMember;

    fn sample_inputs(&self, count: usize, rng: &mut SeededRng) -> Vec<usize> {
        (0..count).map(|_| rng.random_range(0..self.fixture.domain_size())).collect()
    }

    fn train_teacher(&self, n: usize, rng: &mut SeededRng) -> Result<FiniteMember> {
        let sample = self.fixture.sample(n, rng);
        let best = erm_finite(&self.fixture.class, &sample, TieBreak::Random, rng)?;
        Ok(self.fixture.class.member(best))
    }

    fn reference_label(&self, x: &usize) -> u8 {
        self.fixture.labels[*x]
    }

    fn private_size(&self) -> usize {
        self.private_size
    }
}

/// Dataset-backed problem: teachers train on subsamples of a private pool,
/// probes come from a held-out pool, and the reference classifier is ERM on
/// the whole private pool.
#[derive(Debug, Clone)]
pub struct DatasetProblem {
    pub private: Dataset,
    pub probes: Dataset,
    pub trainer: TrainerConfig,
    reference: LinearHypothesis,
}

impl DatasetProblem {
    pub fn new(private: Dataset, probes: Dataset, trainer: TrainerConfig) -> Result<Self> {
        if probes.is_empty() {
            return param_err("probe pool is empty");
        }
        let reference = train_erm(&private, &trainer)?;
        Ok(DatasetProblem {
            private,
            probes,
            trainer,
            reference,
        })
    }
}

impl LearningProblem for DatasetProblem {
    type Input = SparseVector;
    type Model = LinearHypothesis;

    fn sample_inputs(&self, count: usize, rng: &mut SeededRng) -> Vec<SparseVector> {
        let pool = self.probes.examples();
        (0..count)
            .map(|_| pool.choose(rng).expect("nonempty pool").features.clone())
            .collect()
    }

    fn train_teacher(&self, n: usize, rng: &mut SeededRng) -> Result<LinearHypothesis> {
        if n == 0 || n > self.private.len() {
            return param_err(format!("cannot draw {n} of {} private examples", self.private.len()));
        }
        let idx = rand::seq::index::sample(rng, self.private.len(), n).into_vec();
        train_erm(&self.private.subset(&idx), &self.trainer)
    }

    fn reference_label(&self, x: &SparseVector) -> u8 {
        self.reference.predict(x)
    }

    fn private_size(&self) -> usize {
        self.private.len()
    }

    fn train_split_teachers(&self, k: usize, rng: &mut SeededRng) -> Result<Vec<LinearHypothesis>> {
        Ok(crate::learners::train_ensemble(&self.private, k, &self.trainer, rng)?
            .members()
            .to_vec())
    }
}
