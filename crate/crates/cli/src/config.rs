//! The flat run configuration shared by every subcommand.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ntk_lab::eval::{DataConfig, StudyConfig};
use ntk_lab::init::InitScheme;
use ntk_lab::net::{Mode, Readout, DEFAULT_NORM_MOMENTUM};
use ntk_lab::space::SpaceConfig;
use ntk_lab::train::TrainConfig;
use ntk_lab::{Error, Result};
use serde::{Deserialize, Serialize};

/// Every key is optional in the file; missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub jobs: usize,

    pub nodes: usize,
    pub ops: usize,
    pub input_dim: usize,
    pub feature_dim: usize,
    pub cells: usize,
    pub classes: usize,
    pub norm_momentum: f64,
    pub readout: String,

    pub per_class: usize,
    pub spread: f64,
    /// Read the dataset from this file instead of generating it.
    pub data: Option<PathBuf>,

    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,

    pub probe_size: usize,
    pub mode: String,
    pub init: String,

    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let space = SpaceConfig::default();
        let data = DataConfig::default();
        let train = TrainConfig::default();
        Self {
            seed: 0,
            jobs: 0,
            nodes: space.nodes,
            ops: space.ops,
            input_dim: space.input_dim,
            feature_dim: space.feature_dim,
            cells: space.cells,
            classes: space.classes,
            norm_momentum: DEFAULT_NORM_MOMENTUM,
            readout: "mean".into(),
            per_class: data.per_class,
            spread: data.spread,
            data: None,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            momentum: train.momentum,
            weight_decay: train.weight_decay,
            batch_size: train.batch_size,
            probe_size: ntk_lab::eval::DEFAULT_PROBE_SIZE,
            mode: "eval".into(),
            init: "kaiming".into(),
            out_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }

    /// Applies `key=value` overrides. Values are read as TOML and fall back
    /// to plain strings, so `mode=train` and `spread=0.2` both work.
    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<()> {
        if pairs.is_empty() {
            return Ok(());
        }
        let mut table = toml::Table::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        for pair in pairs {
            let (key, raw) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{pair}' is not of the form key=value")))?;
            let (key, raw) = (key.trim(), raw.trim());
            let value = match format!("v = {raw}").parse::<toml::Table>() {
                Ok(mut t) => t.remove("v").expect("parsed key"),
                Err(_) => toml::Value::String(raw.to_string()),
            };
            table.insert(key.to_string(), value);
        }
        *self = table.try_into().map_err(|e: toml::de::Error| Error::Config(format!("--set: {}", e.message())))?;
        Ok(())
    }

    pub fn mode(&self) -> Result<Mode> {
        self.mode.parse()
    }

    pub fn init_scheme(&self) -> Result<InitScheme> {
        self.init.parse()
    }

    pub fn space(&self) -> Result<SpaceConfig> {
        let readout: Readout = self.readout.parse()?;
        let space = SpaceConfig {
            nodes: self.nodes,
            ops: self.ops,
            input_dim: self.input_dim,
            feature_dim: self.feature_dim,
            cells: self.cells,
            classes: self.classes,
            norm_momentum: self.norm_momentum,
            readout,
            ..SpaceConfig::default()
        };
        space.validate()?;
        Ok(space)
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: 0,
        }
    }

    pub fn study(&self) -> Result<StudyConfig> {
        let cfg = StudyConfig {
            space: self.space()?,
            data: DataConfig { per_class: self.per_class, spread: self.spread },
            train: self.train(),
            scheme: self.init_scheme()?,
            probe_size: self.probe_size,
            seed: self.seed,
        };
        cfg.train.validate()?;
        self.mode()?;
        Ok(cfg)
    }

    pub fn output(&self, explicit: Option<&Path>, default_name: &str) -> PathBuf {
        explicit.map_or_else(|| self.out_dir.join(default_name), Path::to_path_buf)
    }

    /// Every key that can influence results. `jobs` is left out because
    /// outputs do not depend on it.
    pub fn recorded(&self) -> toml::Table {
        let mut t = toml::Table::try_from(self).expect("config serializes");
        t.remove("jobs");
        t
    }

    /// The resolved configuration as `# key = value` lines.
    pub fn provenance(&self, command: &str) -> String {
        let mut out = format!("# ntklab {command}\n");
        let body = toml::to_string(&self.recorded()).expect("config serializes");
        for line in body.lines().filter(|l| !l.is_empty()) {
            writeln!(out, "# {line}").expect("write to string");
        }
        out
    }
}
