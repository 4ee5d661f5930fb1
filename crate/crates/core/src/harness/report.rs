//! Trial records, summaries and their CSV/JSON forms.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::learners::MarginRecord;

/// Reals that may be infinite (non-private baselines) serialize as `inf`,
/// which both CSV and JSON can carry as a string.
mod extended_float {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or `inf`")
            }
            fn visit_f64<E>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                v.parse().map_err(|_| E::custom(format!("not a number: {v}")))
            }
        }
        d.deserialize_any(V)
    }
}

/// One trial, one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub dataset: String,
    pub method: String,
    #[serde(with = "extended_float")]
    pub epsilon: f64,
    pub delta: f64,
    pub trial: usize,
    pub seed: u64,
    pub queries: usize,
    pub bots: usize,
    #[serde(with = "extended_float")]
    pub eps_ex_post: f64,
    pub accuracy: f64,
    pub wall_ms: u64,
}

pub const CSV_HEADER: &str =
    "dataset,method,epsilon,delta,trial,seed,queries,bots,eps_ex_post,accuracy,wall_ms";

/// Mean and 95% half-width `1.96·sd/√n` (zero for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanInterval {
    pub mean: f64,
    pub half_width: f64,
}

impl MeanInterval {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return param_err("cannot summarise zero values");
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let half_width = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            1.96 * var.sqrt() / n.sqrt()
        };
        Ok(MeanInterval { mean, half_width })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub dataset: String,
    pub method: String,
    #[serde(with = "extended_float")]
    pub epsilon: f64,
    pub delta: f64,
    pub trials: usize,
    pub accuracy: MeanInterval,
    pub queries: MeanInterval,
    pub bots: MeanInterval,
    #[serde(with = "extended_float")]
    pub mean_eps_ex_post: f64,
}

impl SummaryReport {
    pub fn from_trials(trials: &[TrialReport]) -> Result<Self> {
        let Some(first) = trials.first() else {
            return param_err("no trials to summarise");
        };
        let col = |f: fn(&TrialReport) -> f64| trials.iter().map(f).collect::<Vec<_>>();
        let eps_post = col(|t| t.eps_ex_post);
        Ok(SummaryReport {
            dataset: first.dataset.clone(),
            method: first.method.clone(),
            epsilon: first.epsilon,
            delta: first.delta,
            trials: trials.len(),
            accuracy: MeanInterval::of(&col(|t| t.accuracy))?,
            queries: MeanInterval::of(&col(|t| t.queries as f64))?,
            bots: MeanInterval::of(&col(|t| t.bots as f64))?,
            mean_eps_ex_post: eps_post.iter().sum::<f64>() / eps_post.len() as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(crate::Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

/// The JSON document: every trial plus the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub summary: SummaryReport,
    pub trials: Vec<TrialReport>,
}

pub fn write_trials_csv<W: Write>(trials: &[TrialReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in trials {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials_csv<R: Read>(input: R) -> Result<Vec<TrialReport>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Into::into))
        .collect()
}

pub fn write_report<W: Write>(trials: &[TrialReport], format: ReportFormat, mut out: W) -> Result<()> {
    if trials.is_empty() {
        return param_err("no trials to report");
    }
    match format {
        ReportFormat::Csv => write_trials_csv(trials, out),
        ReportFormat::Json => {
            let record = ExperimentRecord {
                summary: SummaryReport::from_trials(trials)?,
                trials: trials.to_vec(),
            };
            serde_json::to_writer_pretty(&mut out, &record)?;
            writeln!(out)?;
            Ok(())
        }
    }
}

/// Writes the report to `path`, or to standard output when `path` is `-`.
pub fn emit_report(trials: &[TrialReport], format: ReportFormat, path: &Path) -> Result<()> {
    if path == Path::new("-") {
        let stdout = std::io::stdout();
        return write_report(trials, format, stdout.lock());
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_report(trials, format, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_margins_csv<W: Write>(records: &[MarginRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(i: usize, acc: f64, eps: f64) -> TrialReport {
        TrialReport {
            dataset: "toy".into(),
            method: "asq".into(),
            epsilon: eps,
            delta: 1e-4,
            trial: i,
            seed: 1000 + i as u64,
            queries: 40 + i,
            bots: 0,
            eps_ex_post: eps * 0.9,
            accuracy: acc,
            wall_ms: 0,
        }
    }

    #[test]
    fn one_trial_is_two_lines() {
        let mut buf = Vec::new();
        write_report(&[trial(0, 0.8, 1.0)], ReportFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let trials = vec![trial(0, 0.81, 1.0), trial(1, 0.1 + 0.2, f64::INFINITY), trial(2, 1.0 / 3.0, 0.5)];
        let mut buf = Vec::new();
        write_trials_csv(&trials, &mut buf).unwrap();
        assert_eq!(read_trials_csv(buf.as_slice()).unwrap(), trials);

        let mut json = Vec::new();
        write_report(&trials, ReportFormat::Json, &mut json).unwrap();
        let record: ExperimentRecord = serde_json::from_slice(&json).unwrap();
        assert_eq!(record.trials, trials);
        assert_eq!(record.summary, SummaryReport::from_trials(&trials).unwrap());
    }

    #[test]
    fn summary_half_width() {
        let one = SummaryReport::from_trials(&[trial(0, 0.7, 1.0)]).unwrap();
        assert_eq!(one.accuracy, MeanInterval { mean: 0.7, half_width: 0.0 });
        let s = SummaryReport::from_trials(&[trial(0, 0.6, 1.0), trial(1, 0.8, 1.0)]).unwrap();
        // sd = 0.1414, half-width 1.96·sd/√2 = 0.196
        assert!((s.accuracy.mean - 0.7).abs() < 1e-12);
        assert!((s.accuracy.half_width - 0.196).abs() < 1e-12);
        assert!(SummaryReport::from_trials(&[]).is_err());
    }

    #[test]
    fn margin_schema() {
        let mut buf = Vec::new();
        write_margins_csv(&[MarginRecord { probe_id: 3, delta_hat: 0.5, delta_hstar: 0.25 }], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "probe_id,delta_hat,delta_hstar\n3,0.5,0.25\n");
    }
}
