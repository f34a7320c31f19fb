//! Kernel-based architecture scores. All four are oriented so that a higher
//! value predicts a higher final accuracy:
//!
//! | id      | value                                   |
//! |---------|-----------------------------------------|
//! | `fnorm` | `‖Θ‖_F`                                 |
//! | `mean`  | `(1/N²) Σ Θ_ij` (signed entries)        |
//! | `ncn`   | `-λ_max / λ_min`                        |
//! | `lga`   | centered `⟨Θ, L_Y⟩_F` over the norms    |
//!
//! The Frobenius norm upper-bounds `λ_min` since `‖Θ‖_F² = Σ λ_k²` for
//! symmetric `Θ`. Label-gradient alignment compares the centered kernel with
//! the centered `±1` same-class matrix `L_Y`, i.e. it is the Pearson
//! correlation between the two flattened matrices.
//!
//! Singular kernels do not error: the metric carries `degenerate = true` and
//! a documented sentinel (`ncn`: `-∞` for the zero kernel, otherwise `λ_min`
//! floored at `1e-12 λ_max`; `lga`: `0`).

use std::fmt;
use std::str::FromStr;

use crate::error::{contract, Error, Result};
use crate::linalg::{frobenius_norm, is_constant, jacobi_eigen, matrix_mean, DenseMatrix, JACOBI_DEFAULT_TOL};
use crate::ntk::KernelMatrix;

pub const NCN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricId {
    FNorm,
    Mean,
    Ncn,
    Lga,
}

impl MetricId {
    pub const ALL: [MetricId; 4] = [MetricId::FNorm, MetricId::Mean, MetricId::Ncn, MetricId::Lga];

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricId::FNorm => "fnorm",
            MetricId::Mean => "mean",
            MetricId::Ncn => "ncn",
            MetricId::Lga => "lga",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric '{s}' (expected fnorm, mean, ncn or lga)")))
    }
}

pub fn parse_metric_list(s: &str) -> Result<Vec<MetricId>> {
    s.split(',').map(|t| t.trim().parse()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub metric: MetricId,
    pub value: f64,
    pub epoch: usize,
    pub degenerate: bool,
}

impl MetricValue {
    pub fn at_epoch(mut self, epoch: usize) -> Self {
        self.epoch = epoch;
        self
    }
}

/// `+1` where two probe samples share a class, `-1` elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    entries: DenseMatrix,
    degenerate: bool,
}

impl LabelMatrix {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.entries
    }

    /// All labels identical.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

pub fn label_matrix(labels: &[usize]) -> Result<LabelMatrix> {
    let n = labels.len();
    if n < 2 {
        return Err(contract("label matrix needs at least two labels"));
    }
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, if labels[i] == labels[j] { 1.0 } else { -1.0 });
        }
    }
    Ok(LabelMatrix { entries: m, degenerate: labels.iter().all(|&l| l == labels[0]) })
}

pub fn f_norm_metric(theta: &KernelMatrix) -> MetricValue {
    MetricValue {
        metric: MetricId::FNorm,
        value: frobenius_norm(theta.matrix()),
        epoch: 0,
        degenerate: theta.is_degenerate(),
    }
}

pub fn mean_metric(theta: &KernelMatrix) -> MetricValue {
    MetricValue {
        metric: MetricId::Mean,
        value: matrix_mean(theta.matrix()).unwrap_or(0.0),
        epoch: 0,
        degenerate: theta.is_degenerate(),
    }
}

pub fn ncn_metric(theta: &KernelMatrix) -> Result<MetricValue> {
    let eig = jacobi_eigen(theta.matrix(), JACOBI_DEFAULT_TOL)?;
    let lmax = eig.max();
    let mut out = MetricValue { metric: MetricId::Ncn, value: f64::NEG_INFINITY, epoch: 0, degenerate: true };
    if theta.size() == 0 || lmax <= 0.0 {
        return Ok(out);
    }
    let floor = NCN_FLOOR * lmax;
    let mut lmin = eig.min();
    out.degenerate = lmin <= floor;
    if out.degenerate {
        lmin = floor;
    }
    out.value = -lmax / lmin;
    Ok(out)
}

pub fn lga_metric(theta: &KernelMatrix, labels: &[usize]) -> Result<MetricValue> {
    if labels.len() != theta.size() {
        return Err(contract(format!("{} labels for a {}x{} kernel", labels.len(), theta.size(), theta.size())));
    }
    let lm = label_matrix(labels)?;
    let mut out = MetricValue { metric: MetricId::Lga, value: 0.0, epoch: 0, degenerate: true };
    let (k, l) = (theta.matrix().as_slice(), lm.matrix().as_slice());
    if lm.is_degenerate() || is_constant(k) {
        return Ok(out);
    }
    let mk = k.iter().sum::<f64>() / k.len() as f64;
    let ml = l.iter().sum::<f64>() / l.len() as f64;
    let (mut inner, mut kk, mut ll) = (0.0, 0.0, 0.0);
    for (a, b) in k.iter().zip(l) {
        let (ca, cb) = (a - mk, b - ml);
        inner += ca * cb;
        kk += ca * ca;
        ll += cb * cb;
    }
    let denom = kk.sqrt() * ll.sqrt();
    if denom == 0.0 {
        return Ok(out);
    }
    out.value = (inner / denom).clamp(-1.0, 1.0);
    out.degenerate = false;
    Ok(out)
}

/// Un-normalized alignment `⟨Θ, L_Y⟩_F`, the multi-class form of `Yᵀ Θ Y`.
/// Diagnostic only; rankings use [`lga_metric`].
pub fn raw_label_alignment(theta: &KernelMatrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != theta.size() {
        return Err(contract("label count does not match kernel size"));
    }
    let lm = label_matrix(labels)?;
    Ok(theta.matrix().as_slice().iter().zip(lm.matrix().as_slice()).map(|(a, b)| a * b).sum())
}

pub fn evaluate(metric: MetricId, theta: &KernelMatrix, labels: &[usize]) -> Result<MetricValue> {
    match metric {
        MetricId::FNorm => Ok(f_norm_metric(theta)),
        MetricId::Mean => Ok(mean_metric(theta)),
        MetricId::Ncn => ncn_metric(theta),
        MetricId::Lga => lga_metric(theta, labels),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(rows: &[&[f64]]) -> KernelMatrix {
        KernelMatrix::new(DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap())
            .unwrap()
    }

    #[test]
    fn fnorm_and_mean_examples() {
        let k = kernel(&[&[3.0, 4.0], &[4.0, 3.0]]);
        assert!((f_norm_metric(&k).value - 7.0711).abs() < 1e-4);
        assert_eq!(mean_metric(&kernel(&[&[1.0, 2.0], &[2.0, 1.0]])).value, 1.5);
        let zero = kernel(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let (f, m) = (f_norm_metric(&zero), mean_metric(&zero));
        assert_eq!((f.value, f.degenerate), (0.0, true));
        assert_eq!((m.value, m.degenerate), (0.0, true));
    }

    #[test]
    fn ncn_examples() {
        assert_eq!(ncn_metric(&KernelMatrix::new(DenseMatrix::diag(&[1.0, 4.0])).unwrap()).unwrap().value, -4.0);
        let id = ncn_metric(&KernelMatrix::new(DenseMatrix::identity(3)).unwrap()).unwrap();
        assert_eq!((id.value, id.degenerate), (-1.0, false));
        let zero = ncn_metric(&KernelMatrix::new(DenseMatrix::zeros(3, 3)).unwrap()).unwrap();
        assert!(zero.degenerate && zero.value == f64::NEG_INFINITY);
        let singular = ncn_metric(&KernelMatrix::new(DenseMatrix::diag(&[0.0, 2.0])).unwrap()).unwrap();
        assert!(singular.degenerate);
        assert_eq!(singular.value, -1.0 / NCN_FLOOR);
    }

    #[test]
    fn label_matrix_examples() {
        let lm = label_matrix(&[0, 0, 1]).unwrap();
        let expected = DenseMatrix::from_rows(&[
            vec![1.0, 1.0, -1.0],
            vec![1.0, 1.0, -1.0],
            vec![-1.0, -1.0, 1.0],
        ])
        .unwrap();
        assert_eq!(lm.matrix(), &expected);
        assert!(!lm.is_degenerate());
        let same = label_matrix(&[2, 2, 2]).unwrap();
        assert!(same.is_degenerate());
        assert!(same.matrix().as_slice().iter().all(|&v| v == 1.0));
        assert!(label_matrix(&[1]).is_err());
    }

    #[test]
    fn lga_self_and_affine() {
        let labels = [0, 1, 0, 2];
        let l = label_matrix(&labels).unwrap();
        let k = KernelMatrix::new(l.matrix().clone()).unwrap();
        assert!((lga_metric(&k, &labels).unwrap().value - 1.0).abs() < 1e-15);
        let neg = KernelMatrix::new(l.matrix().scale(-1.0)).unwrap();
        assert!((lga_metric(&neg, &labels).unwrap().value + 1.0).abs() < 1e-15);
        let aff = KernelMatrix::new(l.matrix().map(|v| 3.0 * v + 5.0)).unwrap();
        assert!((lga_metric(&aff, &labels).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lga_degenerate_cases() {
        let constant = KernelMatrix::new(DenseMatrix::filled(3, 3, 1.0 / 3.0)).unwrap();
        let v = lga_metric(&constant, &[0, 1, 2]).unwrap();
        assert_eq!((v.value, v.degenerate), (0.0, true));
        let k = KernelMatrix::new(DenseMatrix::identity(3)).unwrap();
        let v = lga_metric(&k, &[1, 1, 1]).unwrap();
        assert_eq!((v.value, v.degenerate), (0.0, true));
        assert!(lga_metric(&k, &[0, 1]).is_err());
    }

    #[test]
    fn raw_alignment_binary_matches_quadratic_form() {
        let k = kernel(&[&[2.0, 0.5, 0.1], &[0.5, 1.0, 0.3], &[0.1, 0.3, 1.5]]);
        let y = [1.0, 1.0, -1.0];
        let quad: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| y[i] * k.get(i, j) * y[j]).sum();
        assert!((raw_label_alignment(&k, &[0, 0, 1]).unwrap() - quad).abs() < 1e-14);
    }

    #[test]
    fn metric_ids_parse() {
        assert_eq!(parse_metric_list("fnorm, mean,ncn,lga").unwrap(), MetricId::ALL.to_vec());
        assert!(matches!("cn".parse::<MetricId>(), Err(Error::Config(_))));
    }
}
