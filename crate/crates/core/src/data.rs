//! Synthetic Gaussian-blob classification data.
//!
//! Text format: one header line
//! `classes=<C> dim=<d> seed=<s> train=<n> test=<m>`, then the `n` train
//! samples followed by the `m` test samples, one per line as
//! `<label> <x_1> ... <x_d>`.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{contract, Error, Result};
use crate::ntk::ProbeBatch;
use crate::rng::{derive_seed, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub classes: usize,
    pub dim: usize,
    pub seed: u64,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Class centers drawn uniformly on the unit sphere.
pub fn class_centers(classes: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Rng::new(derive_seed(seed, 0));
    (0..classes)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n > 1e-12 {
                break v.into_iter().map(|a| a / n).collect();
            }
        })
        .collect()
}

/// `per_class` points per class around unit-norm centers with isotropic
/// noise `spread`. Each class contributes `max(1, round(per_class / 5))`
/// samples to the test split; both splits are shuffled.
pub fn make_dataset(classes: usize, dim: usize, per_class: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 || dim < 2 || per_class < 4 {
        return Err(contract("make_dataset needs C >= 2, d >= 2 and per_class >= 4"));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(contract("spread must be finite and non-negative"));
    }
    let centers = class_centers(classes, dim, seed);
    let mut noise = Rng::new(derive_seed(seed, 1));
    let n_test = ((per_class as f64 / 5.0).round() as usize).max(1);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (label, c) in centers.iter().enumerate() {
        for k in 0..per_class {
            let x = c.iter().map(|&m| m + spread * noise.normal()).collect();
            let s = Sample { x, label };
            if k < n_test {
                test.push(s);
            } else {
                train.push(s);
            }
        }
    }
    let mut order = Rng::new(derive_seed(seed, 2));
    order.shuffle(&mut train);
    order.shuffle(&mut test);
    Ok(Dataset { classes, dim, seed, train, test })
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() || self.test.is_empty() {
            return Err(contract("dataset splits must be non-empty"));
        }
        for s in self.train.iter().chain(&self.test) {
            if s.x.len() != self.dim || s.label >= self.classes {
                return Err(contract("sample does not match dataset shape"));
            }
        }
        Ok(())
    }

    /// Round-robin over classes through the train split, taking each class's
    /// samples in split order until `size` samples are drawn.
    pub fn probe(&self, size: usize) -> Result<ProbeBatch> {
        let mut per_class: Vec<Vec<&Sample>> = vec![Vec::new(); self.classes];
        for s in &self.train {
            per_class[s.label].push(s);
        }
        let available: usize = per_class.iter().map(Vec::len).sum();
        if size > available {
            return Err(Error::Config(format!("probe size {size} exceeds {available} training samples")));
        }
        let (mut xs, mut ys) = (Vec::with_capacity(size), Vec::with_capacity(size));
        let mut round = 0;
        while xs.len() < size {
            for bucket in &per_class {
                if xs.len() == size {
                    break;
                }
                if let Some(s) = bucket.get(round) {
                    xs.push(s.x.clone());
                    ys.push(s.label);
                }
            }
            round += 1;
        }
        ProbeBatch::new(xs, ys)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "classes={} dim={} seed={} train={} test={}\n",
            self.classes,
            self.dim,
            self.seed,
            self.train.len(),
            self.test.len()
        );
        for s in self.train.iter().chain(&self.test) {
            out.push_str(&s.label.to_string());
            for v in &s.x {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| err(1, "missing header".into()))??;
        let mut fields = std::collections::BTreeMap::new();
        for tok in header.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| err(1, format!("bad header field '{tok}'")))?;
            let v: u64 = v.parse().map_err(|_| err(1, format!("bad value in '{tok}'")))?;
            fields.insert(k.to_string(), v);
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| err(1, format!("header lacks '{k}'")));
        let (classes, dim, seed) = (get("classes")? as usize, get("dim")? as usize, get("seed")?);
        let (n_train, n_test) = (get("train")? as usize, get("test")? as usize);
        let mut samples = Vec::with_capacity(n_train + n_test);
        for i in 0..n_train + n_test {
            let lineno = i + 2;
            let line = lines.next().ok_or_else(|| err(lineno, "missing sample".into()))??;
            let mut toks = line.split_whitespace();
            let label: usize = toks
                .next()
                .and_then(|t| t.parse().ok())
                .filter(|&l| l < classes)
                .ok_or_else(|| err(lineno, "bad label".into()))?;
            let x: Vec<f64> = toks
                .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| err(lineno, "bad feature value".into()))?;
            if x.len() != dim {
                return Err(err(lineno, format!("expected {dim} features, found {}", x.len())));
            }
            samples.push(Sample { x, label });
        }
        let test = samples.split_off(n_train);
        let ds = Dataset { classes, dim, seed, train: samples, test };
        ds.validate().map_err(|e| err(1, e.to_string()))?;
        Ok(ds)
    }
}
