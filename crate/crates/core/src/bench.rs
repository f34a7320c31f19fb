//! Exhaustively trained oracle benchmark, stored as JSON lines.
//!
//! Each line holds one [`BenchmarkRecord`]. Metric values are cached under
//! keys `<metric>@<epoch>:<mode>:<context>`, where `context` is the
//! evaluator digest, so a cached value is only reused by studies that share
//! the dataset, probe, init scheme and training setup.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Evaluator;
use crate::metrics::{MetricId, MetricValue};
use crate::net::Mode;
use crate::space::{enumerate_space, CellEncoding};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CachedMetric {
    #[serde(with = "extended_f64")]
    pub value: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkRecord {
    pub arch: String,
    pub index: u64,
    pub seed: u64,
    pub epoch_accs: Vec<f64>,
    pub final_test_acc: f64,
    pub params: usize,
    #[serde(default)]
    pub metrics: BTreeMap<String, CachedMetric>,
}

pub fn metric_key(metric: MetricId, epoch: usize, mode: Mode, context: &str) -> String {
    format!("{metric}@{epoch}:{mode}:{context}")
}

impl BenchmarkRecord {
    pub fn encoding(&self) -> Result<CellEncoding> {
        self.arch.parse()
    }

    pub fn cached(&self, metric: MetricId, epoch: usize, mode: Mode, context: &str) -> Option<MetricValue> {
        self.metrics.get(&metric_key(metric, epoch, mode, context)).map(|c| MetricValue {
            metric,
            value: c.value,
            epoch,
            degenerate: c.degenerate,
        })
    }

    fn check(&self) -> std::result::Result<(), String> {
        self.encoding().map_err(|e| e.to_string())?;
        let in_unit = |a: f64| (0.0..=1.0).contains(&a);
        if !in_unit(self.final_test_acc) || !self.epoch_accs.iter().all(|&a| in_unit(a)) {
            return Err("accuracy outside [0, 1]".into());
        }
        Ok(())
    }
}

/// What to record for every architecture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchPlan {
    pub snapshot_epochs: BTreeSet<usize>,
    pub metrics: Vec<MetricId>,
    pub modes: Vec<Mode>,
}

impl Default for BenchPlan {
    fn default() -> Self {
        Self {
            snapshot_epochs: [0, 1, 3, 5, 10].into_iter().collect(),
            metrics: MetricId::ALL.to_vec(),
            modes: vec![Mode::Train, Mode::Eval],
        }
    }
}

/// Trains one architecture and evaluates every planned metric on every
/// snapshot not beyond the configured epoch count.
pub fn evaluate_architecture(ev: &Evaluator, enc: &CellEncoding, plan: &BenchPlan) -> Result<BenchmarkRecord> {
    let epochs = ev.config().train.epochs;
    let snaps: BTreeSet<usize> = plan.snapshot_epochs.iter().copied().filter(|&t| t <= epochs).collect();
    let history = ev.train_arch(enc, None, &snaps)?;
    let mut metrics = BTreeMap::new();
    for (&t, net) in &history.snapshots {
        for &mode in &plan.modes {
            for v in ev.metrics(net, &plan.metrics, mode, t)? {
                metrics.insert(
                    metric_key(v.metric, t, mode, ev.context()),
                    CachedMetric { value: v.value, degenerate: v.degenerate },
                );
            }
        }
    }
    let index = ev.space().index_of(enc);
    Ok(BenchmarkRecord {
        arch: enc.to_string(),
        index,
        seed: ev.seeds().arch(index),
        epoch_accs: history.test_accuracy,
        final_test_acc: history.final_test_accuracy,
        params: history.snapshots.values().next().map_or(0, |n| n.parameter_count()),
        metrics,
    })
}

pub fn parse_records(text: &str, path: &Path) -> Result<Vec<BenchmarkRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { path: path.to_path_buf(), line: i + 1, msg };
        let rec: BenchmarkRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        rec.check().map_err(err)?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_benchmark(path: &Path) -> Result<Vec<BenchmarkRecord>> {
    let mut text = String::new();
    for line in std::io::BufReader::new(std::fs::File::open(path)?).lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    parse_records(&text, path)
}

pub fn record_line(rec: &BenchmarkRecord) -> String {
    serde_json::to_string(rec).expect("benchmark record serializes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildSummary {
    pub existing: usize,
    pub trained: usize,
}

/// Appends a record for every architecture of the space that `out` does not
/// already hold. New records are written in index order; training runs on
/// `jobs` workers (0 means one per core).
pub fn build_oracle_benchmark(ev: &Evaluator, plan: &BenchPlan, out: &Path, jobs: usize) -> Result<BuildSummary> {
    let existing = if out.exists() { read_benchmark(out)? } else { Vec::new() };
    let have: BTreeSet<&str> = existing.iter().map(|r| r.arch.as_str()).collect();
    let todo: Vec<CellEncoding> = enumerate_space(ev.space())?.filter(|e| !have.contains(e.to_string().as_str())).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let records: Vec<BenchmarkRecord> =
        pool.install(|| todo.par_iter().map(|enc| evaluate_architecture(ev, enc, plan)).collect::<Result<_>>())?;
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(out)?;
    for rec in &records {
        writeln!(file, "{}", record_line(rec))?;
    }
    file.flush()?;
    Ok(BuildSummary { existing: existing.len(), trained: records.len() })
}

/// Adds any missing `(metric, epoch, mode)` values for `ev`'s context by
/// retraining each architecture. Used when the benchmark was built under a
/// different context or without the requested snapshots.
pub fn annotate_metrics(ev: &Evaluator, records: &mut [BenchmarkRecord], plan: &BenchPlan, jobs: usize) -> Result<usize> {
    let needed: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| {
            plan.snapshot_epochs.iter().any(|&t| {
                plan.metrics
                    .iter()
                    .any(|&m| plan.modes.iter().any(|&mode| r.cached(m, t, mode, ev.context()).is_none()))
            })
        })
        .map(|(i, _)| i)
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let fresh: Vec<BenchmarkRecord> = pool.install(|| {
        needed
            .par_iter()
            .map(|&i| evaluate_architecture(ev, &records[i].encoding()?, plan))
            .collect::<Result<_>>()
    })?;
    for (&i, rec) in needed.iter().zip(fresh) {
        records[i].metrics.extend(rec.metrics);
    }
    Ok(needed.len())
}

pub fn write_benchmark(path: &Path, records: &[BenchmarkRecord]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for rec in records {
        writeln!(f, "{}", record_line(rec))?;
    }
    Ok(())
}

/// Non-finite values are stored as the strings `"inf"`, `"-inf"`, `"nan"`.
mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Tag(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Tag(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("invalid number '{other}'"))),
            },
        }
    }
}
