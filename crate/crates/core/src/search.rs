//! Score-guided random search and regularized evolution.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;
use serde::Serialize;

use crate::bench::BenchmarkRecord;
use crate::error::{contract, Error, Result};
use crate::eval::Evaluator;
use crate::metrics::lga_metric;
use crate::net::Mode;
use crate::ntk::compute_ntk;
use crate::rng::Rng;
use crate::space::{mutate, sample_random, CellEncoding, SpaceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Random,
    Evolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    /// Candidates sampled (random) or pool size (evolution).
    pub n: usize,
    /// Epochs trained per candidate before scoring.
    pub t: usize,
    /// Total candidate evaluations; evolution only.
    pub budget: usize,
    pub seed: u64,
    /// Random search draws distinct encodings. Requires `n <= |space|`.
    pub without_replacement: bool,
}

impl SearchConfig {
    pub fn random(n: usize, t: usize, seed: u64) -> Self {
        Self { algorithm: Algorithm::Random, n, t, budget: n, seed, without_replacement: false }
    }

    pub fn evolution(n: usize, budget: usize, t: usize, seed: u64) -> Self {
        Self { algorithm: Algorithm::Evolution, n, t, budget, seed, without_replacement: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("search needs N >= 1".into()));
        }
        if self.algorithm == Algorithm::Evolution && self.budget < self.n {
            return Err(Error::Config(format!("budget {} is smaller than the pool size {}", self.budget, self.n)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
    pub epochs: usize,
}

pub trait Scorer: Sync {
    fn score(&self, enc: &CellEncoding) -> Result<Score>;
}

/// LGA after `t` epochs of training, in the given normalization mode.
pub struct LgaScorer<'a> {
    pub evaluator: &'a Evaluator,
    pub t: usize,
    pub mode: Mode,
}

impl Scorer for LgaScorer<'_> {
    fn score(&self, enc: &CellEncoding) -> Result<Score> {
        let snaps = [self.t].into_iter().collect();
        let h = self.evaluator.train_arch(enc, Some(self.t), &snaps)?;
        let theta = compute_ntk(&h.snapshots[&self.t], self.evaluator.probe(), self.mode)?;
        let v = lga_metric(&theta, self.evaluator.probe().labels())?;
        Ok(Score { value: v.value, degenerate: v.degenerate, epochs: self.t })
    }
}

/// Looks scores up in a table, e.g. benchmark accuracies. Costs no epochs.
pub struct TableScorer {
    pub table: HashMap<CellEncoding, f64>,
}

impl TableScorer {
    pub fn accuracy(records: &[BenchmarkRecord]) -> Result<Self> {
        let table = records.iter().map(|r| Ok((r.encoding()?, r.final_test_acc))).collect::<Result<_>>()?;
        Ok(Self { table })
    }
}

impl Scorer for TableScorer {
    fn score(&self, enc: &CellEncoding) -> Result<Score> {
        let value = *self.table.get(enc).ok_or_else(|| contract(format!("no table entry for {enc}")))?;
        Ok(Score { value, degenerate: false, epochs: 0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub step: usize,
    pub arch: String,
    pub score: f64,
    pub degenerate: bool,
    pub best_so_far: f64,
}

/// Pool membership after one evolution step, as birth steps oldest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolEvent {
    pub step: usize,
    pub parent: usize,
    pub evicted: usize,
    pub pool: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub algorithm: Algorithm,
    pub best_arch: String,
    pub best_score: f64,
    pub best_degenerate: bool,
    /// Every evaluation was degenerate, so the pick is arbitrary.
    pub all_degenerate: bool,
    pub evaluations: usize,
    pub budget: usize,
    pub epochs_trained: usize,
    pub log: Vec<LogEntry>,
    #[serde(skip)]
    pub pool_trace: Vec<PoolEvent>,
}

impl SearchResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("search result serializes");
        s.push('\n');
        s
    }
}

struct Tracker {
    log: Vec<LogEntry>,
    best: Option<(usize, CellEncoding, Score)>,
    epochs: usize,
}

impl Tracker {
    fn new() -> Self {
        Self { log: Vec::new(), best: None, epochs: 0 }
    }

    fn record(&mut self, enc: &CellEncoding, s: Score) {
        let step = self.log.len();
        if self.best.as_ref().is_none_or(|(_, _, b)| s.value > b.value) {
            self.best = Some((step, enc.clone(), s));
        }
        self.epochs += s.epochs;
        let best_so_far = self.best.as_ref().map(|b| b.2.value).expect("best set");
        self.log.push(LogEntry { step, arch: enc.to_string(), score: s.value, degenerate: s.degenerate, best_so_far });
    }

    fn finish(self, algorithm: Algorithm, budget: usize, pool_trace: Vec<PoolEvent>) -> SearchResult {
        let (_, enc, s) = self.best.expect("at least one evaluation");
        SearchResult {
            algorithm,
            best_arch: enc.to_string(),
            best_score: s.value,
            best_degenerate: s.degenerate,
            all_degenerate: self.log.iter().all(|e| e.degenerate),
            evaluations: self.log.len(),
            budget,
            epochs_trained: self.epochs,
            log: self.log,
            pool_trace,
        }
    }
}

fn score_all(scorer: &dyn Scorer, encs: &[CellEncoding]) -> Result<Vec<Score>> {
    encs.par_iter().map(|e| scorer.score(e)).collect()
}

/// Exact argmax of the scores, earliest candidate on ties.
pub fn random_search(cfg: &SearchConfig, space: &SpaceConfig, scorer: &dyn Scorer) -> Result<SearchResult> {
    cfg.validate()?;
    space.validate()?;
    let mut rng = Rng::new(cfg.seed);
    let candidates: Vec<CellEncoding> = if cfg.without_replacement {
        let size = space.space_size();
        if cfg.n as u128 > size {
            return Err(Error::Config(format!("cannot draw {} distinct encodings from {size}", cfg.n)));
        }
        let mut idx: Vec<u64> = (0..size as u64).collect();
        rng.shuffle(&mut idx);
        idx[..cfg.n].iter().map(|&i| space.encoding_at(i)).collect::<Result<_>>()?
    } else {
        (0..cfg.n).map(|_| sample_random(space, &mut rng)).collect()
    };
    let scores = score_all(scorer, &candidates)?;
    let mut tracker = Tracker::new();
    for (enc, s) in candidates.iter().zip(scores) {
        tracker.record(enc, s);
    }
    Ok(tracker.finish(Algorithm::Random, cfg.n, Vec::new()))
}

/// Pool of `n` trained candidates; each step mutates the pool's best, scores
/// the child, drops the oldest member and appends the child. Returns the best
/// architecture over the whole run.
pub fn regularized_evolution(cfg: &SearchConfig, space: &SpaceConfig, scorer: &dyn Scorer) -> Result<SearchResult> {
    cfg.validate()?;
    space.validate()?;
    if space.ops < 2 {
        return Err(Error::MutationImpossible);
    }
    let mut rng = Rng::new(cfg.seed);
    let initial: Vec<CellEncoding> = (0..cfg.n).map(|_| sample_random(space, &mut rng)).collect();
    let scores = score_all(scorer, &initial)?;
    let mut tracker = Tracker::new();
    let mut pool: VecDeque<(usize, CellEncoding, f64)> = VecDeque::with_capacity(cfg.n);
    for (enc, s) in initial.into_iter().zip(scores) {
        pool.push_back((tracker.log.len(), enc.clone(), s.value));
        tracker.record(&enc, s);
    }
    let mut trace = Vec::new();
    while tracker.log.len() < cfg.budget {
        let parent = pool
            .iter()
            .enumerate()
            .fold(0, |best, (i, m)| if m.2 > pool[best].2 { i } else { best });
        let child = mutate(&pool[parent].1, space, &mut rng)?;
        let s = scorer.score(&child)?;
        let step = tracker.log.len();
        let parent_birth = pool[parent].0;
        tracker.record(&child, s);
        let (evicted, _, _) = pool.pop_front().expect("pool non-empty");
        pool.push_back((step, child, s.value));
        trace.push(PoolEvent { step, parent: parent_birth, evicted, pool: pool.iter().map(|m| m.0).collect() });
    }
    Ok(tracker.finish(Algorithm::Evolution, cfg.budget, trace))
}

pub fn run_search(cfg: &SearchConfig, space: &SpaceConfig, scorer: &dyn Scorer) -> Result<SearchResult> {
    match cfg.algorithm {
        Algorithm::Random => random_search(cfg, space, scorer),
        Algorithm::Evolution => regularized_evolution(cfg, space, scorer),
    }
}
