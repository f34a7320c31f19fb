//! A cell search space: complete DAGs on `V` nodes whose edges each carry one
//! of up to five vector operations.
//!
//! Edges are ordered target-major: `(0→1), (0→2), (1→2), (0→3), (1→3), (2→3)`
//! for `V = 4`. An encoding lists one op code per edge in that order, and its
//! textual form joins the codes with `|`.

use std::fmt;
use std::str::FromStr;

use crate::error::{contract, Error, Result};
use crate::init::InitScheme;
use crate::linalg::DenseMatrix;
use crate::net::{LayerSpec, Network, NetworkBuilder, Readout, DEFAULT_NORM_MOMENTUM};
use crate::rng::Rng;

pub const MAX_OPS: usize = 5;
pub const DEFAULT_ENUMERATION_CAP: u64 = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Zero = 0,
    Skip = 1,
    Lin1 = 2,
    Lin3 = 3,
    Avg = 4,
}

impl Op {
    pub const ALL: [Op; MAX_OPS] = [Op::Zero, Op::Skip, Op::Lin1, Op::Lin3, Op::Avg];

    pub fn from_code(code: u8) -> Option<Op> {
        Op::ALL.get(code as usize).copied()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Op::Zero => "zero",
            Op::Skip => "skip",
            Op::Lin1 => "lin1",
            Op::Lin3 => "lin3",
            Op::Avg => "avg",
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self, Op::Lin1 | Op::Lin3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceConfig {
    /// Nodes per cell, `V`.
    pub nodes: usize,
    /// Size of the op set, `K`; the first `K` of [`Op::ALL`] are used.
    pub ops: usize,
    /// Length of the raw input vectors.
    pub input_dim: usize,
    /// Width of every cell node.
    pub feature_dim: usize,
    pub cells: usize,
    pub classes: usize,
    pub enumeration_cap: u64,
    pub norm_momentum: f64,
    pub readout: Readout,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self {
            nodes: 4,
            ops: MAX_OPS,
            input_dim: 16,
            feature_dim: 16,
            cells: 1,
            classes: 3,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            norm_momentum: DEFAULT_NORM_MOMENTUM,
            readout: Readout::MeanLogit,
        }
    }
}

impl SpaceConfig {
    pub fn with_shape(nodes: usize, ops: usize) -> Self {
        Self { nodes, ops, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::Config("a cell needs at least 2 nodes".into()));
        }
        if self.ops == 0 || self.ops > MAX_OPS {
            return Err(Error::Config(format!("op set size must be in 1..={MAX_OPS}")));
        }
        if self.input_dim == 0 || self.feature_dim == 0 || self.cells == 0 {
            return Err(Error::Config("input_dim, feature_dim and cells must be positive".into()));
        }
        if self.classes < 2 {
            return Err(Error::Config("at least two classes required".into()));
        }
        Ok(())
    }

    pub fn edge_count(&self) -> usize {
        self.nodes * (self.nodes - 1) / 2
    }

    /// `K^E`, saturating far above any cap.
    pub fn space_size(&self) -> u128 {
        (self.ops as u128).saturating_pow(self.edge_count() as u32)
    }

    /// `(source, target)` per edge position.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (1..self.nodes).flat_map(|j| (0..j).map(move |i| (i, j))).collect()
    }

    fn check_enumerable(&self) -> Result<u64> {
        let size = self.space_size();
        if size > self.enumeration_cap as u128 {
            return Err(Error::SpaceTooLarge { size, cap: self.enumeration_cap });
        }
        Ok(size as u64)
    }

    /// Lexicographic rank of `enc` (first edge most significant).
    pub fn index_of(&self, enc: &CellEncoding) -> u64 {
        enc.ops.iter().fold(0u64, |acc, &c| acc.wrapping_mul(self.ops as u64).wrapping_add(c as u64))
    }

    pub fn encoding_at(&self, mut index: u64) -> Result<CellEncoding> {
        let size = self.space_size();
        if index as u128 >= size {
            return Err(contract(format!("index {index} outside space of size {size}")));
        }
        let k = self.ops as u64;
        let mut ops = vec![0u8; self.edge_count()];
        for slot in ops.iter_mut().rev() {
            *slot = (index % k) as u8;
            index /= k;
        }
        Ok(CellEncoding { ops })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellEncoding {
    ops: Vec<u8>,
}

impl CellEncoding {
    pub fn new(ops: Vec<u8>, cfg: &SpaceConfig) -> Result<Self> {
        let enc = Self { ops };
        enc.validate(cfg)?;
        Ok(enc)
    }

    pub fn codes(&self) -> &[u8] {
        &self.ops
    }

    pub fn ops(&self) -> impl Iterator<Item = Op> + '_ {
        self.ops.iter().map(|&c| Op::from_code(c).expect("validated op code"))
    }

    pub fn validate(&self, cfg: &SpaceConfig) -> Result<()> {
        if self.ops.len() != cfg.edge_count() {
            return Err(contract(format!(
                "encoding has {} edges, space with {} nodes needs {}",
                self.ops.len(),
                cfg.nodes,
                cfg.edge_count()
            )));
        }
        if let Some(bad) = self.ops.iter().find(|&&c| c as usize >= cfg.ops) {
            return Err(contract(format!("op code {bad} outside op set of size {}", cfg.ops)));
        }
        Ok(())
    }

    pub fn parse(s: &str, cfg: &SpaceConfig) -> Result<Self> {
        let enc: CellEncoding = s.parse()?;
        enc.validate(cfg)?;
        Ok(enc)
    }

    pub fn hamming(&self, other: &CellEncoding) -> usize {
        self.ops.iter().zip(&other.ops).filter(|(a, b)| a != b).count()
    }
}

impl fmt::Display for CellEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.ops.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for CellEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ops = s
            .trim()
            .split('|')
            .map(|t| {
                t.trim().parse::<u8>().map_err(|_| contract(format!("invalid op code '{t}' in encoding '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ops })
    }
}

/// Every encoding exactly once, in lexicographic order.
pub fn enumerate_space(cfg: &SpaceConfig) -> Result<impl Iterator<Item = CellEncoding> + '_> {
    cfg.validate()?;
    let size = cfg.check_enumerable()?;
    Ok((0..size).map(move |i| cfg.encoding_at(i).expect("index within space")))
}

/// Circular three-tap moving average, the vector analog of 3x3 average pooling.
pub fn averaging_projection(dim: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(dim, dim);
    for k in 0..dim {
        for off in [dim - 1, 0, 1] {
            let j = (k + off) % dim;
            m.set(k, j, m.get(k, j) + 1.0 / 3.0);
        }
    }
    m
}

fn op_layers(op: Op, width: usize) -> Vec<LayerSpec> {
    match op {
        Op::Zero => vec![LayerSpec::Zero],
        Op::Skip => Vec::new(),
        Op::Lin1 => vec![LayerSpec::Linear { outputs: width, bias: false }, LayerSpec::Norm],
        Op::Lin3 => vec![
            LayerSpec::Linear { outputs: width, bias: false },
            LayerSpec::Relu,
            LayerSpec::Linear { outputs: width, bias: false },
            LayerSpec::Norm,
        ],
        Op::Avg => vec![LayerSpec::Fixed(averaging_projection(width))],
    }
}

/// Builds the network for `enc`: a stem (linear + norm) from the input to
/// width `feature_dim`, `cells` copies of the cell, and a linear classifier
/// head with bias producing `classes` logits.
pub fn instantiate(enc: &CellEncoding, cfg: &SpaceConfig, scheme: InitScheme, rng: &mut Rng) -> Result<Network> {
    cfg.validate()?;
    enc.validate(cfg)?;
    let width = cfg.feature_dim;
    let mut b = NetworkBuilder::new(cfg.input_dim).norm_momentum(cfg.norm_momentum).readout(cfg.readout);
    let mut cell_input =
        b.add_node(width, vec![(0, vec![LayerSpec::Linear { outputs: width, bias: false }, LayerSpec::Norm])])?;
    let edges = cfg.edges();
    let ops: Vec<Op> = enc.ops().collect();
    for _ in 0..cfg.cells {
        let mut cell_nodes = vec![cell_input];
        for j in 1..cfg.nodes {
            let incoming = edges
                .iter()
                .zip(&ops)
                .filter(|((_, to), _)| *to == j)
                .map(|((from, _), op)| (cell_nodes[*from], op_layers(*op, width)))
                .collect();
            cell_nodes.push(b.add_node(width, incoming)?);
        }
        cell_input = *cell_nodes.last().expect("cell has nodes");
    }
    b.add_node(cfg.classes, vec![(cell_input, vec![LayerSpec::Linear { outputs: cfg.classes, bias: true }])])?;
    b.build(scheme, rng)
}

/// Uniform over all `K^E` encodings.
pub fn sample_random(cfg: &SpaceConfig, rng: &mut Rng) -> CellEncoding {
    CellEncoding { ops: (0..cfg.edge_count()).map(|_| rng.below(cfg.ops as u64) as u8).collect() }
}

/// Reassigns one uniformly chosen edge to a uniformly chosen different op.
pub fn mutate(enc: &CellEncoding, cfg: &SpaceConfig, rng: &mut Rng) -> Result<CellEncoding> {
    enc.validate(cfg)?;
    if cfg.ops < 2 {
        return Err(Error::MutationImpossible);
    }
    let mut child = enc.clone();
    let edge = rng.index(child.ops.len());
    let old = child.ops[edge];
    let mut draw = rng.below(cfg.ops as u64 - 1) as u8;
    if draw >= old {
        draw += 1;
    }
    child.ops[edge] = draw;
    Ok(child)
}
