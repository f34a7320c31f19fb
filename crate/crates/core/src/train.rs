//! Mini-batch momentum SGD on the `±1` one-vs-all squared loss.
//!
//! Each step uses the batch-mean gradient `g` of the summed loss and the
//! update `v <- μ v + (g + λ w)`, `w <- w - η v`, with weight decay applied to
//! every parameter.

use std::collections::{BTreeMap, BTreeSet};

use crate::data::{Dataset, Sample};
use crate::error::{contract, Error, Result};
use crate::linalg::DenseMatrix;
use crate::net::{Mode, Network};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.025, momentum: 0.9, weight_decay: 3e-4, batch_size: 32, epochs: 30, seed: 0 }
    }
}

impl TrainConfig {
    /// A learning rate of exactly zero is accepted so that frozen runs can be
    /// expressed.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be finite and >= 0, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight decay must be finite and >= 0, got {}", self.weight_decay)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    /// Mean per-sample loss over each epoch's batches.
    pub train_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    pub final_test_accuracy: f64,
    /// Network state after epoch `t`; `0` is the untrained network.
    pub snapshots: BTreeMap<usize, Network>,
}

/// `±1` one-vs-all targets, `N x C`.
pub fn one_vs_all(labels: &[usize], classes: usize) -> DenseMatrix {
    let mut t = DenseMatrix::filled(labels.len(), classes, -1.0);
    for (i, &l) in labels.iter().enumerate() {
        t.set(i, l, 1.0);
    }
    t
}

/// Index of the largest logit, lowest index on ties.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Eval-mode accuracy over `split`.
pub fn evaluate_accuracy(net: &Network, split: &[Sample]) -> Result<f64> {
    if split.is_empty() {
        return Err(contract("cannot evaluate accuracy on an empty split"));
    }
    let xs: Vec<&[f64]> = split.iter().map(|s| s.x.as_slice()).collect();
    let out = net.forward_batch(&xs, Mode::Eval)?;
    let correct = split.iter().enumerate().filter(|(i, s)| argmax(out.logits.row(*i)) == s.label).count();
    Ok(correct as f64 / split.len() as f64)
}

pub fn train(net: &mut Network, ds: &Dataset, cfg: &TrainConfig, snapshot_epochs: &BTreeSet<usize>) -> Result<TrainHistory> {
    cfg.validate()?;
    ds.validate()?;
    if net.input_dim() != ds.dim || net.output_dim() != ds.classes {
        return Err(contract(format!(
            "network maps {} -> {}, dataset has {} features and {} classes",
            net.input_dim(),
            net.output_dim(),
            ds.dim,
            ds.classes
        )));
    }
    let mut snapshots = BTreeMap::new();
    if snapshot_epochs.contains(&0) {
        snapshots.insert(0, net.clone());
    }
    let mut rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..ds.train.len()).collect();
    let mut velocity = vec![0.0; net.parameter_count()];
    let mut history = TrainHistory {
        train_loss: Vec::with_capacity(cfg.epochs),
        train_accuracy: Vec::with_capacity(cfg.epochs),
        test_accuracy: Vec::with_capacity(cfg.epochs),
        final_test_accuracy: 0.0,
        snapshots: BTreeMap::new(),
    };
    let diverged = |epoch: usize| move |e: Error| match e {
        Error::NonFinite { .. } => Error::Diverged { epoch },
        other => other,
    };
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| ds.train[i].x.as_slice()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| ds.train[i].label).collect();
            let step = net.loss_and_grad(&xs, &one_vs_all(&labels, ds.classes), Mode::Train).map_err(diverged(epoch))?;
            if !step.loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += step.loss;
            net.commit_batch_stats(&step.stats);
            let inv_b = 1.0 / chunk.len() as f64;
            let params = net.params_mut();
            for ((w, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(&step.grad) {
                *v = cfg.momentum * *v + (g * inv_b + cfg.weight_decay * *w);
                *w -= cfg.learning_rate * *v;
            }
            if params.iter().any(|w| !w.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
        }
        history.train_loss.push(loss_sum / ds.train.len() as f64);
        history.train_accuracy.push(evaluate_accuracy(net, &ds.train).map_err(diverged(epoch))?);
        history.test_accuracy.push(evaluate_accuracy(net, &ds.test).map_err(diverged(epoch))?);
        if snapshot_epochs.contains(&epoch) {
            snapshots.insert(epoch, net.clone());
        }
    }
    history.final_test_accuracy = match history.test_accuracy.last() {
        Some(&a) => a,
        None => evaluate_accuracy(net, &ds.test)?,
    };
    history.snapshots = snapshots;
    Ok(history)
}
