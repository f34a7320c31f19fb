//! One study context: a space, a dataset, a probe batch and the seed plan
//! that ties every architecture to its own reproducible init and data order.
//!
//! From a single run seed `s`:
//!
//! - dataset seed: `derive_seed(s, 1)`
//! - architecture base: `derive_seed(s, 2)`, and for the architecture with
//!   lexicographic index `i`, `a_i = derive_seed(base, i)`
//! - init stream: `derive_seed(a_i, 0)`; shuffling stream: `derive_seed(a_i, 1)`
//! - search stream: `derive_seed(s, 3)`

use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

use crate::data::{make_dataset, Dataset};
use crate::error::{Error, Result};
use crate::init::InitScheme;
use crate::metrics::{evaluate, MetricId, MetricValue};
use crate::net::{Mode, Network};
use crate::ntk::{compute_ntk, KernelMatrix, ProbeBatch};
use crate::rng::{derive_seed, Rng};
use crate::space::{instantiate, CellEncoding, SpaceConfig};
use crate::train::{train, TrainConfig, TrainHistory};

pub const DEFAULT_PROBE_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPlan {
    pub run: u64,
}

impl SeedPlan {
    pub fn new(run: u64) -> Self {
        Self { run }
    }

    pub fn data(&self) -> u64 {
        derive_seed(self.run, 1)
    }

    pub fn arch(&self, index: u64) -> u64 {
        derive_seed(derive_seed(self.run, 2), index)
    }

    pub fn init(&self, index: u64) -> u64 {
        derive_seed(self.arch(index), 0)
    }

    pub fn shuffle(&self, index: u64) -> u64 {
        derive_seed(self.arch(index), 1)
    }

    pub fn search(&self) -> u64 {
        derive_seed(self.run, 3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataConfig {
    pub per_class: usize,
    pub spread: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { per_class: 60, spread: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    pub space: SpaceConfig,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub scheme: InitScheme,
    pub probe_size: usize,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            space: SpaceConfig::default(),
            data: DataConfig::default(),
            train: TrainConfig::default(),
            scheme: InitScheme::default(),
            probe_size: DEFAULT_PROBE_SIZE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluator {
    cfg: StudyConfig,
    seeds: SeedPlan,
    dataset: Dataset,
    probe: ProbeBatch,
    context: String,
}

impl Evaluator {
    pub fn new(cfg: StudyConfig) -> Result<Self> {
        cfg.space.validate()?;
        let seeds = SeedPlan::new(cfg.seed);
        let ds = make_dataset(cfg.space.classes, cfg.space.input_dim, cfg.data.per_class, cfg.data.spread, seeds.data())
            .map_err(|e| Error::Config(e.to_string()))?;
        Self::with_dataset(cfg, ds)
    }

    pub fn with_dataset(cfg: StudyConfig, dataset: Dataset) -> Result<Self> {
        cfg.space.validate()?;
        cfg.train.validate()?;
        if dataset.dim != cfg.space.input_dim || dataset.classes != cfg.space.classes {
            return Err(Error::Config(format!(
                "dataset has {} features and {} classes, space expects {} and {}",
                dataset.dim, dataset.classes, cfg.space.input_dim, cfg.space.classes
            )));
        }
        if cfg.probe_size < 2 {
            return Err(Error::Config("probe size must be at least 2".into()));
        }
        let probe = dataset.probe(cfg.probe_size)?;
        let context = context_hash(&cfg, &dataset, &probe);
        Ok(Self { cfg, seeds: SeedPlan::new(cfg.seed), dataset, probe, context })
    }

    pub fn config(&self) -> &StudyConfig {
        &self.cfg
    }

    pub fn seeds(&self) -> SeedPlan {
        self.seeds
    }

    pub fn space(&self) -> &SpaceConfig {
        &self.cfg.space
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn probe(&self) -> &ProbeBatch {
        &self.probe
    }

    /// Short hex digest of everything a cached metric depends on.
    pub fn context(&self) -> &str {
        &self.context
    }

    /// The untrained network for `enc`.
    pub fn network(&self, enc: &CellEncoding) -> Result<Network> {
        let index = self.cfg.space.index_of(enc);
        instantiate(enc, &self.cfg.space, self.cfg.scheme, &mut Rng::new(self.seeds.init(index)))
    }

    /// Trains `enc` for `epochs` (defaulting to the configured count) and
    /// keeps the requested snapshots.
    pub fn train_arch(&self, enc: &CellEncoding, epochs: Option<usize>, snapshots: &BTreeSet<usize>) -> Result<TrainHistory> {
        let mut net = self.network(enc)?;
        let index = self.cfg.space.index_of(enc);
        let tcfg = TrainConfig {
            epochs: epochs.unwrap_or(self.cfg.train.epochs),
            seed: self.seeds.shuffle(index),
            ..self.cfg.train
        };
        train(&mut net, &self.dataset, &tcfg, snapshots)
    }

    pub fn kernel(&self, net: &Network, mode: Mode) -> Result<KernelMatrix> {
        compute_ntk(net, &self.probe, mode)
    }

    pub fn metrics(&self, net: &Network, metrics: &[MetricId], mode: Mode, epoch: usize) -> Result<Vec<MetricValue>> {
        let theta = self.kernel(net, mode)?;
        metrics.iter().map(|&m| Ok(evaluate(m, &theta, self.probe.labels())?.at_epoch(epoch))).collect()
    }
}

fn context_hash(cfg: &StudyConfig, ds: &Dataset, probe: &ProbeBatch) -> String {
    let s = &cfg.space;
    let t = &cfg.train;
    let desc = format!(
        "space={}x{} in={} width={} cells={} classes={} momentum={} readout={}|train=lr{} mu{} wd{} b{} e{}|init={}|data={} n={}|probe={}",
        s.nodes,
        s.ops,
        s.input_dim,
        s.feature_dim,
        s.cells,
        s.classes,
        s.norm_momentum,
        s.readout.as_str(),
        t.learning_rate,
        t.momentum,
        t.weight_decay,
        t.batch_size,
        t.epochs,
        cfg.scheme,
        ds.seed,
        ds.train.len() + ds.test.len(),
        probe.fingerprint(),
    );
    let digest = Sha256::digest(format!("{desc}|seed={}", cfg.seed).as_bytes());
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}
