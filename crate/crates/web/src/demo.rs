use std::collections::BTreeSet;

use ntk_lab::eval::{DataConfig, Evaluator, StudyConfig};
use ntk_lab::metrics::{evaluate, MetricId};
use ntk_lab::net::Mode;
use ntk_lab::ntk::{kernel_correlation, relative_kernel_difference};
use ntk_lab::rng::Rng;
use ntk_lab::space::{sample_random, CellEncoding, SpaceConfig};
use ntk_lab::train::{evaluate_accuracy, TrainConfig};
use serde::Serialize;

/// Longest training run a single call may request.
pub const MAX_EPOCHS: usize = 40;

fn study(space: SpaceConfig, seed: u64) -> StudyConfig {
    StudyConfig {
        space,
        data: DataConfig { per_class: 40, spread: 0.3 },
        train: TrainConfig { epochs: 10, ..TrainConfig::default() },
        probe_size: 24,
        seed,
        ..StudyConfig::default()
    }
}

fn space_for(arch: &str) -> Result<SpaceConfig, String> {
    // node count follows from the edge count n(n-1)/2
    let edges = arch.split('|').count();
    let nodes = (2..12)
        .find(|n| n * (n - 1) / 2 == edges)
        .ok_or_else(|| format!("'{arch}' has {edges} edges; a cell with n nodes has n(n-1)/2"))?;
    Ok(SpaceConfig::with_shape(nodes, 5))
}

fn setup(arch: &str, seed: u64, epochs: usize, mode: &str) -> Result<(Evaluator, CellEncoding, Mode), String> {
    if epochs > MAX_EPOCHS {
        return Err(format!("at most {MAX_EPOCHS} epochs per call"));
    }
    let mode: Mode = mode.parse().map_err(|e: ntk_lab::Error| e.to_string())?;
    let ev = Evaluator::new(study(space_for(arch)?, seed)).map_err(|e| e.to_string())?;
    let enc = CellEncoding::parse(arch, ev.space()).map_err(|e| e.to_string())?;
    Ok((ev, enc, mode))
}

fn json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Arch {
    arch: String,
    index: u64,
}

pub fn random_arch(seed: u64, nodes: usize, ops: usize) -> Result<String, String> {
    let space = SpaceConfig::with_shape(nodes, ops);
    space.validate().map_err(|e| e.to_string())?;
    let enc = sample_random(&space, &mut Rng::new(seed));
    json(&Arch { arch: enc.to_string(), index: space.index_of(&enc) })
}

/// A metric value; non-finite values become `null`.
#[derive(Serialize)]
struct Metric {
    id: &'static str,
    value: Option<f64>,
    degenerate: bool,
}

#[derive(Serialize)]
struct KernelView {
    arch: String,
    epochs: usize,
    mode: &'static str,
    labels: Vec<usize>,
    kernel: Vec<Vec<f64>>,
    metrics: Vec<Metric>,
    test_accuracy: f64,
}

fn metrics_of(theta: &ntk_lab::ntk::KernelMatrix, labels: &[usize]) -> Result<Vec<Metric>, String> {
    MetricId::ALL
        .iter()
        .map(|&m| {
            let v = evaluate(m, theta, labels).map_err(|e| e.to_string())?;
            Ok(Metric { id: m.as_str(), value: v.value.is_finite().then_some(v.value), degenerate: v.degenerate })
        })
        .collect()
}

pub fn kernel_view(arch: &str, seed: u64, epochs: usize, mode: &str) -> Result<String, String> {
    let (ev, enc, mode) = setup(arch, seed, epochs, mode)?;
    let h = ev.train_arch(&enc, Some(epochs), &[epochs].into_iter().collect()).map_err(|e| e.to_string())?;
    let net = &h.snapshots[&epochs];
    let theta = ev.kernel(net, mode).map_err(|e| e.to_string())?;
    let n = theta.size();
    json(&KernelView {
        arch: enc.to_string(),
        epochs,
        mode: mode.as_str(),
        labels: ev.probe().labels().to_vec(),
        kernel: (0..n).map(|i| theta.matrix().row(i).to_vec()).collect(),
        metrics: metrics_of(&theta, ev.probe().labels())?,
        test_accuracy: h.final_test_accuracy,
    })
}

#[derive(Serialize)]
struct Curves {
    arch: String,
    mode: &'static str,
    epoch: Vec<usize>,
    test_accuracy: Vec<f64>,
    kernel_correlation: Vec<Option<f64>>,
    relative_difference: Vec<Option<f64>>,
    fnorm: Vec<Option<f64>>,
    mean: Vec<Option<f64>>,
    ncn: Vec<Option<f64>>,
    lga: Vec<Option<f64>>,
}

pub fn metric_curves(arch: &str, seed: u64, epochs: usize, mode: &str) -> Result<String, String> {
    let (ev, enc, mode) = setup(arch, seed, epochs, mode)?;
    let snaps: BTreeSet<usize> = (0..=epochs).collect();
    let h = ev.train_arch(&enc, Some(epochs), &snaps).map_err(|e| e.to_string())?;
    let err = |e: ntk_lab::Error| e.to_string();
    let theta0 = ev.kernel(&h.snapshots[&0], mode).map_err(err)?;
    let mut c = Curves {
        arch: enc.to_string(),
        mode: mode.as_str(),
        epoch: Vec::new(),
        test_accuracy: Vec::new(),
        kernel_correlation: Vec::new(),
        relative_difference: Vec::new(),
        fnorm: Vec::new(),
        mean: Vec::new(),
        ncn: Vec::new(),
        lga: Vec::new(),
    };
    for (&e, net) in &h.snapshots {
        let theta = ev.kernel(net, mode).map_err(err)?;
        c.epoch.push(e);
        c.test_accuracy.push(evaluate_accuracy(net, &ev.dataset().test).map_err(err)?);
        c.kernel_correlation.push(kernel_correlation(&theta0, &theta).ok());
        c.relative_difference.push(relative_kernel_difference(&theta0, &theta).ok());
        let m = metrics_of(&theta, ev.probe().labels())?;
        c.fnorm.push(m[0].value);
        c.mean.push(m[1].value);
        c.ncn.push(m[2].value);
        c.lga.push(m[3].value);
    }
    json(&c)
}
