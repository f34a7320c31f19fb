//! Empirical neural tangent kernel of a probe batch.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{contract, Error, Result};
use crate::linalg::{dot, frobenius_norm, pearson_correlation, DenseMatrix};
use crate::net::{GradientSet, Mode, Network};

/// Symmetric `N x N` Gram matrix of per-sample gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    entries: DenseMatrix,
    degenerate: bool,
}

impl KernelMatrix {
    pub fn new(entries: DenseMatrix) -> Result<Self> {
        if !entries.is_symmetric(1e-10) {
            return Err(contract("kernel matrix must be square and symmetric"));
        }
        let degenerate = entries.as_slice().iter().all(|&v| v == 0.0);
        Ok(Self { entries, degenerate })
    }

    pub fn from_gradients(grads: &GradientSet) -> Self {
        let n = grads.samples();
        let mut theta = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(grads.row(i), grads.row(j));
                theta.set(i, j, v);
                theta.set(j, i, v);
            }
        }
        Self { entries: theta, degenerate: grads.is_all_zero() }
    }

    pub fn size(&self) -> usize {
        self.entries.rows()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(i, j)
    }

    /// True when every gradient was zero (the kernel is the zero matrix).
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { entries: self.entries.scale(c), degenerate: self.degenerate || c == 0.0 }
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { entries: self.entries.permute_symmetric(perm), degenerate: self.degenerate }
    }

    /// Plain-text form: a line with `N`, then `N` lines of `N` space-separated decimals.
    pub fn to_text(&self) -> String {
        let n = self.size();
        let mut out = format!("{n}\n");
        for i in 0..n {
            for j in 0..n {
                if j > 0 {
                    out.push(' ');
                }
                write!(out, "{}", self.get(i, j)).expect("write to string");
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let parse_err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
        let mut lines = file.lines();
        let header = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))??;
        let n: usize = header.trim().parse().map_err(|_| parse_err(1, format!("bad size '{header}'")))?;
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            let line = lines.next().ok_or_else(|| parse_err(i + 2, "missing row".into()))??;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| parse_err(i + 2, format!("bad number '{t}'"))))
                .collect::<Result<_>>()?;
            if row.len() != n {
                return Err(parse_err(i + 2, format!("expected {n} values, found {}", row.len())));
            }
            data.extend(row);
        }
        let entries = DenseMatrix::new(n, n, data).map_err(|e| parse_err(1, e.to_string()))?;
        KernelMatrix::new(entries).map_err(|e| parse_err(1, e.to_string()))
    }
}

/// Fixed minibatch on which every architecture's kernel is computed.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeBatch {
    samples: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl ProbeBatch {
    pub fn new(samples: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(contract("probe samples and labels differ in length"));
        }
        if samples.len() < 2 {
            return Err(contract("probe batch needs at least two samples"));
        }
        if labels.iter().all(|&l| l == labels[0]) {
            return Err(contract("probe batch needs at least two distinct classes"));
        }
        if let Some(first) = samples.first() {
            if samples.iter().any(|s| s.len() != first.len()) {
                return Err(contract("probe samples differ in dimension"));
            }
        }
        Ok(Self { samples, labels })
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Reorders samples and labels: new position `i` holds old sample `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        Self::new(perm.iter().map(|&i| self.samples[i].clone()).collect(), perm.iter().map(|&i| self.labels[i]).collect())
    }

    /// Content fingerprint: hex SHA-256 prefix over labels and sample bits.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (s, l) in self.samples.iter().zip(&self.labels) {
            h.update((*l as u64).to_le_bytes());
            for v in s {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// `Θ = G Gᵀ` over the probe batch.
///
/// Entries are computed once per unordered pair and mirrored, so the result
/// is exactly symmetric. An all-zero gradient set yields the zero kernel
/// flagged as degenerate.
pub fn compute_ntk(net: &Network, probe: &ProbeBatch, mode: Mode) -> Result<KernelMatrix> {
    let grads = net.batch_gradients(probe.samples(), mode)?;
    Ok(KernelMatrix::from_gradients(&grads))
}

pub fn kernel_correlation(theta0: &KernelMatrix, thetat: &KernelMatrix) -> Result<f64> {
    if theta0.size() != thetat.size() {
        return Err(contract("kernels differ in size"));
    }
    pearson_correlation(theta0.matrix(), thetat.matrix())
}

/// `||Θ_t - Θ_0||_F / ||Θ_0||_F`.
pub fn relative_kernel_difference(theta0: &KernelMatrix, thetat: &KernelMatrix) -> Result<f64> {
    if theta0.size() != thetat.size() {
        return Err(contract("kernels differ in size"));
    }
    let base = frobenius_norm(theta0.matrix());
    if base == 0.0 {
        return Err(Error::DegenerateKernel("initial kernel has zero norm".into()));
    }
    Ok(frobenius_norm(&thetat.matrix().sub(theta0.matrix())?) / base)
}
