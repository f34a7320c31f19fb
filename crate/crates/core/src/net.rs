//! A small DAG-structured feedforward network with exact reverse-mode
//! gradients.
//!
//! A [`Network`] is a list of nodes. Node 0 is the input vector; every other
//! node is the sum of its incoming edges, and each edge applies a chain of
//! [`Layer`]s to an earlier node. The last node holds the `C` logits.
//!
//! All trainable values live in one flat parameter vector. The canonical
//! order is node-major, then edge order, then layer order; a linear layer
//! contributes its `outputs x inputs` weight row-major followed by its bias,
//! a normalization layer its scale followed by its shift. Gradients use the
//! same order.
//!
//! Normalization layers standardize each feature and apply a learned
//! scale/shift. In [`Mode::Train`] they use the statistics of the current
//! batch and gradients flow through those statistics; in [`Mode::Eval`] they
//! use the running statistics, which only [`Network::commit_batch_stats`]
//! modifies.

use std::fmt;
use std::str::FromStr;

use crate::error::{contract, Error, Result};
use crate::init::{init_weights, InitScheme};
use crate::linalg::{dot, DenseMatrix};
use crate::rng::Rng;

pub const NORM_EPS: f64 = 1e-5;
pub const DEFAULT_NORM_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Train,
    Eval,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Train => "train",
            Mode::Eval => "eval",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Mode::Train),
            "eval" => Ok(Mode::Eval),
            _ => Err(Error::Config(format!("unknown normalization mode '{s}'"))),
        }
    }
}

/// How the `C` logits are reduced to the scalar whose gradients form the NTK.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    MeanLogit,
    FirstLogit,
}

impl Readout {
    pub fn as_str(&self) -> &'static str {
        match self {
            Readout::MeanLogit => "mean",
            Readout::FirstLogit => "first",
        }
    }

    fn seed(&self, c: usize) -> Vec<f64> {
        match self {
            Readout::MeanLogit => vec![1.0 / c as f64; c],
            Readout::FirstLogit => {
                let mut s = vec![0.0; c];
                s[0] = 1.0;
                s
            }
        }
    }
}

impl FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Readout::MeanLogit),
            "first" => Ok(Readout::FirstLogit),
            _ => Err(Error::Config(format!("unknown readout '{s}'"))),
        }
    }
}

/// Layer request used while building; dimensions are inferred from the chain.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Linear { outputs: usize, bias: bool },
    Relu,
    Norm,
    /// Non-trainable projection `y = M x`.
    Fixed(DenseMatrix),
    /// Maps everything to zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Linear { inputs: usize, outputs: usize, weight: usize, bias: Option<usize> },
    Relu { dim: usize },
    Norm { dim: usize, scale: usize, shift: usize, state: usize },
    Fixed { matrix: DenseMatrix },
    Zero { dim: usize },
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        match self {
            Layer::Linear { inputs, .. } => *inputs,
            Layer::Relu { dim } | Layer::Norm { dim, .. } | Layer::Zero { dim } => *dim,
            Layer::Fixed { matrix } => matrix.cols(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Layer::Linear { outputs, .. } => *outputs,
            Layer::Relu { dim } | Layer::Norm { dim, .. } | Layer::Zero { dim } => *dim,
            Layer::Fixed { matrix } => matrix.rows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub dim: usize,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormState {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    /// Weight on the previous running value: `r <- m r + (1 - m) batch`.
    pub momentum: f64,
}

/// Per-normalization-layer batch `(mean, biased variance)`, filled in train mode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchStats(pub Vec<Option<(Vec<f64>, Vec<f64>)>>);

#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub logits: DenseMatrix,
    pub stats: BatchStats,
}

#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub stats: BatchStats,
}

/// `N x P` matrix of per-sample parameter gradients of the scalar readout.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    rows: DenseMatrix,
}

impl GradientSet {
    pub fn from_matrix(rows: DenseMatrix) -> Self {
        Self { rows }
    }

    pub fn samples(&self) -> usize {
        self.rows.rows()
    }

    pub fn params(&self) -> usize {
        self.rows.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.rows.row(i)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.rows
    }

    pub fn is_all_zero(&self) -> bool {
        self.rows.as_slice().iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Scale,
    Shift,
}

/// One contiguous block of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamBlock {
    pub node: usize,
    pub edge: usize,
    pub layer: usize,
    pub kind: ParamKind,
    pub offset: usize,
    pub len: usize,
}

pub struct NetworkBuilder {
    input_dim: usize,
    nodes: Vec<Node>,
    param_count: usize,
    norm_count: usize,
    norm_momentum: f64,
    readout: Readout,
}

impl NetworkBuilder {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            nodes: vec![Node { dim: input_dim, edges: Vec::new() }],
            param_count: 0,
            norm_count: 0,
            norm_momentum: DEFAULT_NORM_MOMENTUM,
            readout: Readout::MeanLogit,
        }
    }

    pub fn readout(mut self, readout: Readout) -> Self {
        self.readout = readout;
        self
    }

    pub fn norm_momentum(mut self, momentum: f64) -> Self {
        self.norm_momentum = momentum;
        self
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Appends a node of width `dim` and returns its index.
    pub fn add_node(&mut self, dim: usize, edges: Vec<(usize, Vec<LayerSpec>)>) -> Result<usize> {
        if dim == 0 {
            return Err(contract("node width must be positive"));
        }
        let mut built = Vec::with_capacity(edges.len());
        for (from, specs) in edges {
            let Some(src) = self.nodes.get(from) else {
                return Err(contract(format!("edge source {from} does not precede node {}", self.nodes.len())));
            };
            let mut cur = src.dim;
            let mut layers = Vec::with_capacity(specs.len());
            for spec in specs {
                let layer = match spec {
                    LayerSpec::Linear { outputs, bias } => {
                        if outputs == 0 {
                            return Err(contract("linear layer with zero outputs"));
                        }
                        let weight = self.param_count;
                        self.param_count += outputs * cur;
                        let bias = bias.then(|| {
                            let b = self.param_count;
                            self.param_count += outputs;
                            b
                        });
                        Layer::Linear { inputs: cur, outputs, weight, bias }
                    }
                    LayerSpec::Relu => Layer::Relu { dim: cur },
                    LayerSpec::Norm => {
                        let scale = self.param_count;
                        let shift = scale + cur;
                        self.param_count += 2 * cur;
                        let state = self.norm_count;
                        self.norm_count += 1;
                        Layer::Norm { dim: cur, scale, shift, state }
                    }
                    LayerSpec::Fixed(matrix) => {
                        if matrix.cols() != cur {
                            return Err(contract(format!(
                                "fixed projection expects {} inputs, chain provides {cur}",
                                matrix.cols()
                            )));
                        }
                        Layer::Fixed { matrix }
                    }
                    LayerSpec::Zero => Layer::Zero { dim: cur },
                };
                cur = layer.output_dim();
                layers.push(layer);
            }
            if cur != dim {
                return Err(contract(format!("edge from node {from} produces width {cur}, node expects {dim}")));
            }
            built.push(Edge { from, layers });
        }
        self.nodes.push(Node { dim, edges: built });
        Ok(self.nodes.len() - 1)
    }

    /// Allocates parameters without initializing them (all zero, norm scales 1).
    pub fn build_zeroed(self) -> Result<Network> {
        if self.nodes.len() < 2 {
            return Err(contract("network needs at least one node beyond the input"));
        }
        if !(0.0..1.0).contains(&self.norm_momentum) {
            return Err(Error::Config(format!("norm momentum {} outside [0, 1)", self.norm_momentum)));
        }
        let mut params = vec![0.0; self.param_count];
        let mut norms = vec![None; self.norm_count];
        for node in &self.nodes {
            for edge in &node.edges {
                for layer in &edge.layers {
                    if let Layer::Norm { dim, scale, state, .. } = layer {
                        params[*scale..*scale + dim].fill(1.0);
                        norms[*state] = Some(NormState {
                            running_mean: vec![0.0; *dim],
                            running_var: vec![1.0; *dim],
                            momentum: self.norm_momentum,
                        });
                    }
                }
            }
        }
        Ok(Network {
            input_dim: self.input_dim,
            nodes: self.nodes,
            params,
            norms: norms.into_iter().map(|n| n.expect("every norm slot assigned")).collect(),
            readout: self.readout,
        })
    }

    /// Builds and initializes linear weights in canonical order from `rng`.
    pub fn build(self, scheme: InitScheme, rng: &mut Rng) -> Result<Network> {
        let mut net = self.build_zeroed()?;
        let mut linears = Vec::new();
        for node in &net.nodes {
            for edge in &node.edges {
                for layer in &edge.layers {
                    if let Layer::Linear { inputs, outputs, weight, .. } = layer {
                        linears.push((*inputs, *outputs, *weight));
                    }
                }
            }
        }
        for (inputs, outputs, weight) in linears {
            let w = init_weights(inputs, outputs, scheme, rng)?;
            net.params[weight..weight + inputs * outputs].copy_from_slice(w.as_slice());
        }
        Ok(net)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    nodes: Vec<Node>,
    params: Vec<f64>,
    norms: Vec<NormState>,
    readout: Readout,
}

enum Cache {
    None,
    Input(Vec<f64>),
    Norm { xhat: Vec<f64>, inv_std: Vec<f64> },
}

struct Tape {
    batch: usize,
    nodes: Vec<Vec<f64>>,
    caches: Vec<Vec<Vec<Cache>>>,
}

impl Network {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.nodes.last().map_or(0, |n| n.dim)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn readout_kind(&self) -> Readout {
        self.readout
    }

    pub fn set_readout(&mut self, readout: Readout) {
        self.readout = readout;
    }

    /// Flattened parameters in canonical order.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Inverse of [`Network::params`].
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(contract(format!("expected {} parameters, got {}", self.params.len(), params.len())));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(contract("non-finite parameter"));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn norm_states(&self) -> &[NormState] {
        &self.norms
    }

    pub fn norm_states_mut(&mut self) -> &mut [NormState] {
        &mut self.norms
    }

    pub fn param_layout(&self) -> Vec<ParamBlock> {
        let mut blocks = Vec::new();
        for (n, node) in self.nodes.iter().enumerate() {
            for (e, edge) in node.edges.iter().enumerate() {
                for (l, layer) in edge.layers.iter().enumerate() {
                    let mut push = |kind, offset, len| {
                        blocks.push(ParamBlock { node: n, edge: e, layer: l, kind, offset, len })
                    };
                    match layer {
                        Layer::Linear { inputs, outputs, weight, bias } => {
                            push(ParamKind::Weight, *weight, inputs * outputs);
                            if let Some(b) = bias {
                                push(ParamKind::Bias, *b, *outputs);
                            }
                        }
                        Layer::Norm { dim, scale, shift, .. } => {
                            push(ParamKind::Scale, *scale, *dim);
                            push(ParamKind::Shift, *shift, *dim);
                        }
                        _ => {}
                    }
                }
            }
        }
        blocks
    }

    pub fn readout(&self, logits: &[f64]) -> f64 {
        dot(&self.readout.seed(logits.len()), logits)
    }

    pub fn forward(&self, x: &[f64], mode: Mode) -> Result<Vec<f64>> {
        let tape = self.run_forward(&[x], mode, None)?;
        Ok(tape.nodes.last().expect("output node").clone())
    }

    pub fn scalar_readout(&self, x: &[f64], mode: Mode) -> Result<f64> {
        Ok(self.readout(&self.forward(x, mode)?))
    }

    /// Batched forward pass. In train mode the returned stats can be applied
    /// with [`Network::commit_batch_stats`].
    pub fn forward_batch<S: AsRef<[f64]>>(&self, xs: &[S], mode: Mode) -> Result<BatchOutput> {
        let mut stats = BatchStats(vec![None; self.norms.len()]);
        let tape = self.run_forward(xs, mode, Some(&mut stats))?;
        let logits = DenseMatrix::new(tape.batch, self.output_dim(), tape.nodes.last().expect("output").clone())?;
        Ok(BatchOutput { logits, stats })
    }

    pub fn commit_batch_stats(&mut self, stats: &BatchStats) {
        for (state, batch) in self.norms.iter_mut().zip(&stats.0) {
            if let Some((mean, var)) = batch {
                let m = state.momentum;
                for (r, b) in state.running_mean.iter_mut().zip(mean) {
                    *r = m * *r + (1.0 - m) * b;
                }
                for (r, b) in state.running_var.iter_mut().zip(var) {
                    *r = m * *r + (1.0 - m) * b;
                }
            }
        }
    }

    /// Gradient of [`Network::scalar_readout`] with respect to all parameters.
    pub fn per_sample_gradient(&self, x: &[f64], mode: Mode) -> Result<Vec<f64>> {
        let tape = self.run_forward(&[x], mode, None)?;
        let mut grad = vec![0.0; self.params.len()];
        self.run_backward(&tape, self.readout.seed(self.output_dim()), mode, &mut grad)?;
        Ok(grad)
    }

    /// Row `i` is the gradient of the readout at sample `i`. In train mode the
    /// samples form one batch, so each row also carries the dependence of the
    /// batch statistics on the parameters.
    pub fn batch_gradients<S: AsRef<[f64]>>(&self, xs: &[S], mode: Mode) -> Result<GradientSet> {
        let p = self.params.len();
        let mut rows = vec![0.0; xs.len() * p];
        match mode {
            Mode::Eval => {
                for (i, x) in xs.iter().enumerate() {
                    let g = self.per_sample_gradient(x.as_ref(), mode)?;
                    rows[i * p..(i + 1) * p].copy_from_slice(&g);
                }
            }
            Mode::Train => {
                let tape = self.run_forward(xs, mode, None)?;
                let c = self.output_dim();
                let seed = self.readout.seed(c);
                for i in 0..xs.len() {
                    let mut d_out = vec![0.0; xs.len() * c];
                    d_out[i * c..(i + 1) * c].copy_from_slice(&seed);
                    self.run_backward(&tape, d_out, mode, &mut rows[i * p..(i + 1) * p])?;
                }
            }
        }
        Ok(GradientSet { rows: DenseMatrix::new(xs.len(), p, rows)? })
    }

    /// Summed squared loss `sum_i ||y_i - logits_i||^2` and its exact gradient.
    pub fn loss_and_grad<S: AsRef<[f64]>>(&self, xs: &[S], targets: &DenseMatrix, mode: Mode) -> Result<LossGrad> {
        let c = self.output_dim();
        if targets.rows() != xs.len() || targets.cols() != c {
            return Err(contract(format!(
                "targets are {}x{}, expected {}x{c}",
                targets.rows(),
                targets.cols(),
                xs.len()
            )));
        }
        if targets.as_slice().iter().any(|&t| t != 1.0 && t != -1.0) {
            return Err(contract("targets must be +1 or -1"));
        }
        let mut stats = BatchStats(vec![None; self.norms.len()]);
        let tape = self.run_forward(xs, mode, Some(&mut stats))?;
        let logits = tape.nodes.last().expect("output");
        let mut loss = 0.0;
        let mut d_out = Vec::with_capacity(logits.len());
        for (z, y) in logits.iter().zip(targets.as_slice()) {
            let r = z - y;
            loss += r * r;
            d_out.push(2.0 * r);
        }
        let mut grad = vec![0.0; self.params.len()];
        self.run_backward(&tape, d_out, mode, &mut grad)?;
        Ok(LossGrad { loss, grad, stats })
    }

    fn run_forward<S: AsRef<[f64]>>(&self, xs: &[S], mode: Mode, mut stats: Option<&mut BatchStats>) -> Result<Tape> {
        let batch = xs.len();
        if batch == 0 {
            return Err(contract("empty batch"));
        }
        let mut input = Vec::with_capacity(batch * self.input_dim);
        for x in xs {
            let x = x.as_ref();
            if x.len() != self.input_dim {
                return Err(contract(format!("input has length {}, network expects {}", x.len(), self.input_dim)));
            }
            input.extend_from_slice(x);
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node: 0 });
        }

        let mut values: Vec<Vec<f64>> = Vec::with_capacity(self.nodes.len());
        values.push(input);
        let mut caches = Vec::with_capacity(self.nodes.len());
        caches.push(Vec::new());
        for (n, node) in self.nodes.iter().enumerate().skip(1) {
            let mut acc = vec![0.0; batch * node.dim];
            let mut node_caches = Vec::with_capacity(node.edges.len());
            for edge in &node.edges {
                let mut cur = values[edge.from].clone();
                let mut edge_caches = Vec::with_capacity(edge.layers.len());
                for layer in &edge.layers {
                    let (out, cache) = self.layer_forward(layer, cur, batch, mode, stats.as_deref_mut());
                    cur = out;
                    edge_caches.push(cache);
                }
                for (a, v) in acc.iter_mut().zip(&cur) {
                    *a += v;
                }
                node_caches.push(edge_caches);
            }
            if acc.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { node: n });
            }
            values.push(acc);
            caches.push(node_caches);
        }
        Ok(Tape { batch, nodes: values, caches })
    }

    fn layer_forward(
        &self,
        layer: &Layer,
        x: Vec<f64>,
        batch: usize,
        mode: Mode,
        stats: Option<&mut BatchStats>,
    ) -> (Vec<f64>, Cache) {
        match layer {
            Layer::Linear { inputs, outputs, weight, bias } => {
                let w = &self.params[*weight..*weight + inputs * outputs];
                let mut y = vec![0.0; batch * outputs];
                for b in 0..batch {
                    let xb = &x[b * inputs..(b + 1) * inputs];
                    for o in 0..*outputs {
                        let base = bias.map_or(0.0, |off| self.params[off + o]);
                        y[b * outputs + o] = base + dot(&w[o * inputs..(o + 1) * inputs], xb);
                    }
                }
                (y, Cache::Input(x))
            }
            Layer::Relu { .. } => {
                let y = x.iter().map(|&v| v.max(0.0)).collect();
                (y, Cache::Input(x))
            }
            Layer::Norm { dim, scale, shift, state } => {
                let dim = *dim;
                let (mean, var) = match mode {
                    Mode::Eval => {
                        let s = &self.norms[*state];
                        (s.running_mean.clone(), s.running_var.clone())
                    }
                    Mode::Train => {
                        let mut mean = vec![0.0; dim];
                        for b in 0..batch {
                            for k in 0..dim {
                                mean[k] += x[b * dim + k];
                            }
                        }
                        mean.iter_mut().for_each(|m| *m /= batch as f64);
                        let mut var = vec![0.0; dim];
                        for b in 0..batch {
                            for k in 0..dim {
                                let d = x[b * dim + k] - mean[k];
                                var[k] += d * d;
                            }
                        }
                        var.iter_mut().for_each(|v| *v /= batch as f64);
                        (mean, var)
                    }
                };
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + NORM_EPS).sqrt()).collect();
                let gamma = &self.params[*scale..*scale + dim];
                let beta = &self.params[*shift..*shift + dim];
                let mut xhat = vec![0.0; batch * dim];
                let mut y = vec![0.0; batch * dim];
                for b in 0..batch {
                    for k in 0..dim {
                        let h = (x[b * dim + k] - mean[k]) * inv_std[k];
                        xhat[b * dim + k] = h;
                        y[b * dim + k] = gamma[k] * h + beta[k];
                    }
                }
                if mode == Mode::Train {
                    if let Some(stats) = stats {
                        stats.0[*state] = Some((mean, var));
                    }
                }
                (y, Cache::Norm { xhat, inv_std })
            }
            Layer::Fixed { matrix } => {
                let (out, inp) = (matrix.rows(), matrix.cols());
                let mut y = vec![0.0; batch * out];
                for b in 0..batch {
                    let xb = &x[b * inp..(b + 1) * inp];
                    for o in 0..out {
                        y[b * out + o] = dot(matrix.row(o), xb);
                    }
                }
                (y, Cache::None)
            }
            Layer::Zero { .. } => (vec![0.0; x.len()], Cache::None),
        }
    }

    fn run_backward(&self, tape: &Tape, d_out: Vec<f64>, mode: Mode, grad: &mut [f64]) -> Result<()> {
        let batch = tape.batch;
        let mut node_grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        let last = self.nodes.len() - 1;
        debug_assert_eq!(d_out.len(), batch * self.output_dim());
        node_grads[last] = Some(d_out);
        for n in (1..self.nodes.len()).rev() {
            let Some(g) = node_grads[n].take() else { continue };
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { node: n });
            }
            let node = &self.nodes[n];
            for (edge, caches) in node.edges.iter().zip(&tape.caches[n]) {
                let mut cur = Some(g.clone());
                for (layer, cache) in edge.layers.iter().zip(caches).rev() {
                    cur = self.layer_backward(layer, cache, cur.expect("live gradient"), batch, mode, grad);
                    if cur.is_none() {
                        break;
                    }
                }
                let Some(cur) = cur else { continue };
                if edge.from == 0 {
                    continue;
                }
                match &mut node_grads[edge.from] {
                    Some(acc) => acc.iter_mut().zip(&cur).for_each(|(a, d)| *a += d),
                    slot @ None => *slot = Some(cur),
                }
            }
        }
        Ok(())
    }

    /// Returns the input gradient, or `None` when it is identically zero.
    fn layer_backward(
        &self,
        layer: &Layer,
        cache: &Cache,
        dy: Vec<f64>,
        batch: usize,
        mode: Mode,
        grad: &mut [f64],
    ) -> Option<Vec<f64>> {
        match (layer, cache) {
            (Layer::Linear { inputs, outputs, weight, bias }, Cache::Input(x)) => {
                let (inputs, outputs) = (*inputs, *outputs);
                let w = &self.params[*weight..*weight + inputs * outputs];
                let mut dx = vec![0.0; batch * inputs];
                for b in 0..batch {
                    let xb = &x[b * inputs..(b + 1) * inputs];
                    for o in 0..outputs {
                        let d = dy[b * outputs + o];
                        if d == 0.0 {
                            continue;
                        }
                        let gw = &mut grad[*weight + o * inputs..*weight + (o + 1) * inputs];
                        for (g, xv) in gw.iter_mut().zip(xb) {
                            *g += d * xv;
                        }
                        if let Some(off) = bias {
                            grad[off + o] += d;
                        }
                        let dxb = &mut dx[b * inputs..(b + 1) * inputs];
                        for (dv, wv) in dxb.iter_mut().zip(&w[o * inputs..(o + 1) * inputs]) {
                            *dv += d * wv;
                        }
                    }
                }
                Some(dx)
            }
            (Layer::Relu { .. }, Cache::Input(x)) => {
                Some(dy.iter().zip(x).map(|(d, &v)| if v > 0.0 { *d } else { 0.0 }).collect())
            }
            (Layer::Norm { dim, scale, shift, .. }, Cache::Norm { xhat, inv_std }) => {
                let dim = *dim;
                let gamma = &self.params[*scale..*scale + dim];
                let mut dxhat = vec![0.0; batch * dim];
                for b in 0..batch {
                    for k in 0..dim {
                        let i = b * dim + k;
                        grad[*scale + k] += dy[i] * xhat[i];
                        grad[*shift + k] += dy[i];
                        dxhat[i] = dy[i] * gamma[k];
                    }
                }
                match mode {
                    Mode::Eval => {
                        for b in 0..batch {
                            for k in 0..dim {
                                dxhat[b * dim + k] *= inv_std[k];
                            }
                        }
                        Some(dxhat)
                    }
                    Mode::Train => {
                        let bf = batch as f64;
                        let mut sum = vec![0.0; dim];
                        let mut sum_h = vec![0.0; dim];
                        for b in 0..batch {
                            for k in 0..dim {
                                let i = b * dim + k;
                                sum[k] += dxhat[i];
                                sum_h[k] += dxhat[i] * xhat[i];
                            }
                        }
                        let mut dx = vec![0.0; batch * dim];
                        for b in 0..batch {
                            for k in 0..dim {
                                let i = b * dim + k;
                                dx[i] = inv_std[k] / bf * (bf * dxhat[i] - sum[k] - xhat[i] * sum_h[k]);
                            }
                        }
                        Some(dx)
                    }
                }
            }
            (Layer::Fixed { matrix }, _) => {
                let (out, inp) = (matrix.rows(), matrix.cols());
                let mut dx = vec![0.0; batch * inp];
                for b in 0..batch {
                    for o in 0..out {
                        let d = dy[b * out + o];
                        if d == 0.0 {
                            continue;
                        }
                        for (dv, m) in dx[b * inp..(b + 1) * inp].iter_mut().zip(matrix.row(o)) {
                            *dv += d * m;
                        }
                    }
                }
                Some(dx)
            }
            (Layer::Zero { .. }, _) => None,
            _ => unreachable!("layer/cache mismatch"),
        }
    }
}
