use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::Rng;
use serde::Serialize;

use pate::dp::{calibrate_gaussian_sigma, calibrate_svt_lambda, dp_to_zcdp, svt_threshold_w, PrivacyBudget};
use pate::harness::{
    emit_report, parse_libsvm_with, split_protocol, write_libsvm, write_margins_csv, ExperimentConfig, KPolicy,
    LabelMap, Method, ReportFormat,
};
use pate::learners::{margin_distribution_report, Ensemble, LearningProblem, MarginRecord, TrainerConfig};
use pate::pipelines::{compute_k_for_gaussian, compute_svt_params};
use pate::seed::{child_rng, rng_from_seed};
use pate::synthdata::{
    gen_voting_fails, log_log_slope, threshold_erm_excess_risk, DataGenerator, DatasetProblem, GeneratorSpec,
    LinearProblem, ThresholdProblem, VotingFailsProblem,
};
use pate::{Error, Result};

#[derive(Parser)]
#[command(name = "pate", version, about = "Private aggregation of teacher ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print noise scales and ensemble sizes for a privacy budget.
    Calibrate(CalibrateArgs),
    /// Run a passive student experiment.
    Psq(ExperimentArgs),
    /// Run an active student experiment.
    Asq(ExperimentArgs),
    /// Sample a synthetic dataset, or measure the threshold learning rate.
    Simulate(SimulateArgs),
    /// Per-probe teacher agreement margins.
    Margins(MarginsArgs),
    /// Aggregate error on the two voting fixtures.
    Examples(ExamplesArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    /// Number of answered queries the budget must cover.
    #[arg(long, default_value_t = 1)]
    ell: usize,
    /// Number of unstable answers allowed before halting.
    #[arg(long)]
    cutoff: Option<usize>,
    /// Private sample size, for the Gaussian ensemble size.
    #[arg(long)]
    n: Option<usize>,
    /// Expected single-teacher error, for the sparse-vector cutoff and ensemble size.
    #[arg(long)]
    teacher_error: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    beta: f64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// LIBSVM file or generator name.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed ensemble size instead of one teacher per 100 examples.
    #[arg(long)]
    k: Option<usize>,
    /// Raw label values read as positive and negative, e.g. `1,2`.
    #[arg(long, value_parser = parse_label_map)]
    label_map: Option<LabelMap>,
    /// Sample size when the dataset is a generator.
    #[arg(long)]
    samples: Option<usize>,
    /// Record per-trial wall-clock time.
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value = "-")]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "realizable")]
    generator: String,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    flip: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instead of sampling, write mean excess risk of threshold ERM for
    /// n = 2^min-exp .. 2^max-exp.
    #[arg(long)]
    rate: bool,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long, default_value_t = 7)]
    min_exp: u32,
    #[arg(long, default_value_t = 13)]
    max_exp: u32,
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Args)]
struct MarginsArgs {
    /// LIBSVM file or generator name.
    #[arg(long)]
    dataset: String,
    #[arg(long, value_parser = parse_label_map)]
    label_map: Option<LabelMap>,
    /// Number of teachers; defaults to one per 100 private examples.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    probes: usize,
    /// Private sample size for generators.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Args)]
struct ExamplesArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 10_000)]
    points: usize,
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

fn parse_label_map(s: &str) -> Result<LabelMap, String> {
    let (p, n) = s.split_once(',').ok_or("expected `positive,negative`")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok(LabelMap::Custom {
        positive: num(p)?,
        negative: num(n)?,
    })
}

fn output(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        Ok(Box::new(io::stdout().lock()))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(output(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Quantity {
    quantity: &'static str,
    value: f64,
}

fn calibrate(a: &CalibrateArgs) -> Result<()> {
    let budget = PrivacyBudget::new(a.epsilon, a.delta)?;
    let mut rows = vec![
        Quantity {
            quantity: "rho",
            value: dp_to_zcdp(a.epsilon),
        },
        Quantity {
            quantity: "sigma",
            value: calibrate_gaussian_sigma(a.ell, &budget)?,
        },
    ];
    if let Some(cutoff) = a.cutoff {
        let lambda = calibrate_svt_lambda(cutoff, &budget)?;
        rows.push(Quantity {
            quantity: "lambda",
            value: lambda,
        });
        rows.push(Quantity {
            quantity: "w",
            value: svt_threshold_w(lambda, a.ell, cutoff, a.delta)?,
        });
    }
    if let Some(n) = a.n {
        rows.push(Quantity {
            quantity: "k_gaussian",
            value: compute_k_for_gaussian(a.ell, &budget, n)? as f64,
        });
    }
    if let Some(err) = a.teacher_error {
        let p = compute_svt_params(a.ell, err, a.beta, &budget)?;
        rows.push(Quantity {
            quantity: "svt_cutoff",
            value: p.cutoff as f64,
        });
        rows.push(Quantity {
            quantity: "svt_k",
            value: p.k as f64,
        });
    }
    write_rows(&rows, Path::new("-"))
}

fn experiment(a: &ExperimentArgs, active: bool) -> Result<()> {
    let mut config = match &a.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => {
            let dataset = a
                .dataset
                .clone()
                .ok_or_else(|| Error::Config("--dataset is required without --config".into()))?;
            let epsilon = a
                .epsilon
                .ok_or_else(|| Error::Config("--epsilon is required without --config".into()))?;
            let method = if active { Method::Asq } else { Method::PsqGaussian };
            ExperimentConfig::new(dataset, method, epsilon)
        }
    };
    if let Some(d) = &a.dataset {
        config.dataset = d.clone();
    }
    if let Some(m) = a.method {
        config.method = m;
    }
    if let Some(e) = a.epsilon {
        config.epsilon = e;
    }
    if a.delta.is_some() {
        config.delta = a.delta;
    }
    if let Some(t) = a.trials {
        config.trials = t;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(k) = a.k {
        config.k = KPolicy::Explicit(k);
    }
    if let Some(l) = a.label_map {
        config.label_map = l;
    }
    if let Some(n) = a.samples {
        config.samples = n;
    }
    config.timing |= a.timing;
    if config.method.is_active() != active {
        let cmd = if active { "asq" } else { "psq" };
        return Err(Error::Config(format!(
            "method `{}` cannot run under `{cmd}`",
            config.method.name()
        )));
    }
    config.validate()?;
    info!(
        "running {} on {} for {} trials",
        config.method.name(),
        config.dataset_name(),
        config.trials
    );
    let out = pate::harness::run_experiment(&config)?;
    let s = &out.summary;
    info!(
        "accuracy {:.4} ± {:.4}, queries {:.1}, bots {:.1}",
        s.accuracy.mean, s.accuracy.half_width, s.queries.mean, s.bots.mean
    );
    emit_report(&out.trials, a.format, &a.out)
}

fn generator_spec(a: &SimulateArgs) -> Result<GeneratorSpec> {
    let mut spec = GeneratorSpec::by_name(&a.generator)?;
    match &mut spec {
        GeneratorSpec::Realizable { dim } => *dim = a.dim.unwrap_or(*dim),
        GeneratorSpec::Massart { dim, flip } => {
            *dim = a.dim.unwrap_or(*dim);
            *flip = a.flip.unwrap_or(*flip);
        }
        GeneratorSpec::Tnc { tau, .. } => *tau = a.tau.unwrap_or(*tau),
        GeneratorSpec::VotingFails => {}
        GeneratorSpec::VotingWins { xi, domain_size } => {
            *xi = a.xi.unwrap_or(*xi);
            *domain_size = a.dim.unwrap_or(*domain_size);
        }
    }
    Ok(spec)
}

#[derive(Serialize)]
struct RatePoint {
    n: usize,
    excess_risk: f64,
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let generator = generator_spec(a)?.build(a.seed)?;
    if a.rate {
        let DataGenerator::Tnc(g) = generator else {
            return Err(Error::Config("--rate needs the tnc generator".into()));
        };
        if a.min_exp >= a.max_exp || a.max_exp > 30 {
            return Err(Error::Config("need min-exp < max-exp ≤ 30".into()));
        }
        let rows = (a.min_exp..=a.max_exp)
            .map(|e| {
                let n = 1usize << e;
                threshold_erm_excess_risk(&g, n, a.reps, child_rng(a.seed, e as u64).random())
                    .map(|excess_risk| RatePoint { n, excess_risk })
            })
            .collect::<Result<Vec<_>>>()?;
        let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.excess_risk).collect();
        info!("log-log slope {:.4}", log_log_slope(&xs, &ys));
        return write_rows(&rows, &a.out);
    }
    let data = generator.dataset(a.samples, &mut rng_from_seed(child_rng(a.seed, 1).random()))?;
    let mut out = output(&a.out)?;
    write_libsvm(&data, &mut out)?;
    out.flush()?;
    Ok(())
}

fn margins(a: &MarginsArgs) -> Result<()> {
    let mut rng = rng_from_seed(a.seed);
    let path = PathBuf::from(&a.dataset);
    let k_for = |n: usize| a.k.unwrap_or_else(|| KPolicy::default().resolve(n));
    let records: Vec<MarginRecord> = if path.exists() {
        let data = parse_libsvm_with(&path, a.label_map.unwrap_or_default())?;
        let split = split_protocol(&data, [0.8, 0.02, 0.18], &mut rng)?;
        let k = k_for(split.teacher.len());
        let problem = DatasetProblem::new(split.teacher, split.test, TrainerConfig::default())?;
        margin_distribution_report(&problem, k, a.probes, &mut rng)?
    } else {
        let k = k_for(a.samples);
        match GeneratorSpec::by_name(&a.dataset)?.build(a.seed)? {
            DataGenerator::Realizable(generator) | DataGenerator::Massart(generator) => {
                let problem = LinearProblem {
                    generator,
                    private_size: a.samples,
                    trainer: TrainerConfig::default(),
                };
                margin_distribution_report(&problem, k, a.probes, &mut rng)?
            }
            DataGenerator::Tnc(generator) => {
                let problem = ThresholdProblem {
                    generator,
                    private_size: a.samples,
                };
                margin_distribution_report(&problem, k, a.probes, &mut rng)?
            }
            DataGenerator::VotingFails(fixture) => {
                let problem = VotingFailsProblem {
                    fixture,
                    private_size: a.samples,
                };
                margin_distribution_report(&problem, k, a.probes, &mut rng)?
            }
            DataGenerator::VotingWins(_) => {
                return Err(Error::Config(
                    "voting-wins teachers are simulated votes, not trained models".into(),
                ))
            }
        }
    };
    write_margins_csv(&records, output(&a.out)?)
}

#[derive(Serialize)]
struct ExampleRow {
    fixture: &'static str,
    k: usize,
    aggregate_error: f64,
    reference: f64,
}

fn examples(a: &ExamplesArgs) -> Result<()> {
    let fixture = gen_voting_fails();
    let members = (0..3).map(|i| fixture.class.member(i)).collect();
    let mut rows = vec![ExampleRow {
        fixture: "voting-fails-exact",
        k: 3,
        aggregate_error: fixture.error(&Ensemble::new(members)?),
        reference: 0.5,
    }];

    let k = 999;
    let problem = VotingFailsProblem {
        fixture: fixture.clone(),
        private_size: 100 * k,
    };
    let mut rng = rng_from_seed(a.seed);
    let mut total = 0.0;
    for _ in 0..a.reps {
        let ens = Ensemble::new(problem.train_split_teachers(k, &mut rng)?)?;
        total += fixture.error(&ens);
    }
    rows.push(ExampleRow {
        fixture: "voting-fails-trained",
        k,
        aggregate_error: total / a.reps as f64,
        reference: 0.5,
    });

    let wins = pate::synthdata::gen_voting_wins(0.1, 1000, &mut rng)?;
    for k in [50, 100, 200] {
        rows.push(ExampleRow {
            fixture: "voting-wins",
            k,
            aggregate_error: wins.aggregate_error(k, a.points, &mut rng),
            reference: wins.hoeffding_bound(k),
        });
    }
    write_rows(&rows, &a.out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate(a) => calibrate(&a),
        Command::Psq(a) => experiment(&a, false),
        Command::Asq(a) => experiment(&a, true),
        Command::Simulate(a) => simulate(&a),
        Command::Margins(a) => margins(&a),
        Command::Examples(a) => examples(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
