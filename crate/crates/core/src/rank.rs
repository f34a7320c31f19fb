//! Rank correlation of metric scores against final accuracy.

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::bench::BenchmarkRecord;
use crate::error::{contract, Error, Result};
use crate::metrics::{MetricId, MetricValue};
use crate::net::Mode;
use crate::rng::{derive_seed, Rng};

fn key(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

fn cmp(a: f64, b: f64) -> Ordering {
    key(a).total_cmp(&key(b))
}

fn tied_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if cmp(w[0], w[1]) == Ordering::Equal {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if cmp(v[j], v[i]) == Ordering::Less {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's tau-b in `O(n log n)`.
///
/// `-0.0` and `0.0` compare equal; infinities are ordinary extreme values.
/// Fails on NaN, on fewer than two points, and when either input is
/// entirely tied.
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(contract(format!("kendall_tau inputs differ in length ({} vs {})", xs.len(), ys.len())));
    }
    let n = xs.len();
    if n < 2 {
        return Err(contract("kendall_tau needs at least two points"));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(contract("kendall_tau input contains NaN"));
    }
    let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_by(|a, b| cmp(a.0, b.0).then(cmp(a.1, b.1)));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let xsorted: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let n1 = tied_pairs(&xsorted);
    let mut n3 = 0u64;
    let mut run = 1u64;
    for w in pairs.windows(2) {
        if cmp(w[0].0, w[1].0) == Ordering::Equal && cmp(w[0].1, w[1].1) == Ordering::Equal {
            run += 1;
        } else {
            n3 += run * (run - 1) / 2;
            run = 1;
        }
    }
    n3 += run * (run - 1) / 2;

    let mut yv: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count(&mut yv, &mut Vec::with_capacity(n));
    let n2 = tied_pairs(&yv);
    if n1 == n0 || n2 == n0 {
        return Err(Error::TiedRanks);
    }
    let s = n0 as i128 - n1 as i128 - n2 as i128 + n3 as i128 - 2 * swaps as i128;
    let denom = ((n0 - n1) as f64).sqrt() * ((n0 - n2) as f64).sqrt();
    Ok((s as f64 / denom).clamp(-1.0, 1.0))
}

/// Supplies a metric value for one benchmark record.
pub trait MetricSource {
    fn value(&self, rec: &BenchmarkRecord, metric: MetricId, epoch: usize, mode: Mode) -> Result<MetricValue>;
}

/// Reads values cached in the records under one context digest.
pub struct CachedSource {
    pub context: String,
}

impl MetricSource for CachedSource {
    fn value(&self, rec: &BenchmarkRecord, metric: MetricId, epoch: usize, mode: Mode) -> Result<MetricValue> {
        rec.cached(metric, epoch, mode, &self.context).ok_or_else(|| Error::MissingSnapshot {
            arch: rec.arch.clone(),
            key: format!("{metric}@{epoch}:{mode}"),
            epoch,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub metric: MetricId,
    pub epoch: usize,
    pub mode: Mode,
    /// `None` when every architecture received the same score.
    pub tau: Option<f64>,
    pub samples: usize,
    pub degenerate: usize,
}

/// One row per `(metric, epoch, mode)`, in the order given.
pub fn rank_correlation_report(
    records: &[BenchmarkRecord],
    source: &dyn MetricSource,
    metrics: &[MetricId],
    epochs: &[usize],
    modes: &[Mode],
) -> Result<Vec<MetricReport>> {
    let accs: Vec<f64> = records.iter().map(|r| r.final_test_acc).collect();
    let mut out = Vec::new();
    for &metric in metrics {
        for &epoch in epochs {
            for &mode in modes {
                let vals: Vec<MetricValue> =
                    records.iter().map(|r| source.value(r, metric, epoch, mode)).collect::<Result<_>>()?;
                let scores: Vec<f64> = vals.iter().map(|v| v.value).collect();
                let tau = match kendall_tau(&scores, &accs) {
                    Ok(t) => Some(t),
                    Err(Error::TiedRanks) => None,
                    Err(e) => return Err(e),
                };
                out.push(MetricReport {
                    metric,
                    epoch,
                    mode,
                    tau,
                    samples: records.len(),
                    degenerate: vals.iter().filter(|v| v.degenerate).count(),
                });
            }
        }
    }
    Ok(out)
}

pub fn fmt_tau(t: Option<f64>) -> String {
    t.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

pub fn report_csv(rows: &[MetricReport]) -> String {
    let mut out = String::from("metric,t,mode,tau,n,degenerate\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{},{}", r.metric, r.epoch, r.mode, fmt_tau(r.tau), r.samples, r.degenerate)
            .expect("write to string");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linearly interpolated quantiles over the sorted values.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Some(Summary {
        count: v.len(),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        min: v[0],
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecileBin {
    /// `1` holds the most accurate tenth.
    pub decile: usize,
    pub size: usize,
    pub sampled: usize,
    /// The requested per-decile sample size exceeded the bin.
    pub clamped: bool,
    /// Fewer than two members; no tau computed.
    pub skipped: bool,
    /// Samples whose scores or accuracies were all tied.
    pub undefined: usize,
    pub taus: Vec<f64>,
    pub summary: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecileReport {
    pub metric: MetricId,
    pub epoch: usize,
    pub mode: Mode,
    pub seeds: usize,
    pub per_decile: usize,
    pub bins: Vec<DecileBin>,
}

/// Architectures sorted by accuracy, descending, with ties in encoding order.
pub fn accuracy_order(records: &[BenchmarkRecord]) -> Result<Vec<usize>> {
    let encs = records.iter().map(|r| r.encoding()).collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        records[b].final_test_acc.total_cmp(&records[a].final_test_acc).then_with(|| encs[a].cmp(&encs[b]))
    });
    Ok(order)
}

/// Bin `k` covers sorted positions `floor(k n / 10) .. floor((k + 1) n / 10)`.
pub fn decile_bins(n: usize) -> Vec<std::ops::Range<usize>> {
    (0..10).map(|k| k * n / 10..(k + 1) * n / 10).collect()
}

#[allow(clippy::too_many_arguments)]
pub fn decile_analysis(
    records: &[BenchmarkRecord],
    source: &dyn MetricSource,
    metric: MetricId,
    epoch: usize,
    mode: Mode,
    seeds: usize,
    per_decile: usize,
    base_seed: u64,
) -> Result<DecileReport> {
    if seeds == 0 || per_decile == 0 {
        return Err(Error::Config("decile analysis needs at least one seed and per_decile >= 1".into()));
    }
    let order = accuracy_order(records)?;
    let mut bins = Vec::with_capacity(10);
    for (k, range) in decile_bins(records.len()).into_iter().enumerate() {
        let members: Vec<usize> = order[range].to_vec();
        let size = members.len();
        let sampled = per_decile.min(size);
        let mut bin = DecileBin {
            decile: k + 1,
            size,
            sampled,
            clamped: per_decile > size,
            skipped: size < 2,
            undefined: 0,
            taus: Vec::new(),
            summary: None,
        };
        if !bin.skipped {
            for s in 0..seeds {
                let mut pick = members.clone();
                Rng::new(derive_seed(derive_seed(base_seed, k as u64), s as u64)).shuffle(&mut pick);
                pick.truncate(sampled);
                pick.sort_unstable();
                let scores: Vec<f64> = pick
                    .iter()
                    .map(|&i| source.value(&records[i], metric, epoch, mode).map(|v| v.value))
                    .collect::<Result<_>>()?;
                let accs: Vec<f64> = pick.iter().map(|&i| records[i].final_test_acc).collect();
                match kendall_tau(&scores, &accs) {
                    Ok(t) => bin.taus.push(t),
                    Err(Error::TiedRanks) => bin.undefined += 1,
                    Err(e) => return Err(e),
                }
            }
            bin.summary = summarize(&bin.taus);
        }
        bins.push(bin);
    }
    Ok(DecileReport { metric, epoch, mode, seeds, per_decile, bins })
}

pub fn decile_csv(report: &DecileReport) -> String {
    let mut out = String::from("decile,size,sampled,clamped,skipped,undefined,mean,min,q1,median,q3,max\n");
    for b in &report.bins {
        let stats = match &b.summary {
            Some(s) => format!("{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}", s.mean, s.min, s.q1, s.median, s.q3, s.max),
            None => "NA,NA,NA,NA,NA,NA".to_string(),
        };
        writeln!(out, "P{},{},{},{},{},{},{stats}", b.decile, b.size, b.sampled, b.clamped, b.skipped, b.undefined)
            .expect("write to string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_examples() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        let t = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((t - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn tau_errors() {
        assert!(matches!(kendall_tau(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::TiedRanks)));
        assert!(kendall_tau(&[1.0], &[1.0]).is_err());
        assert!(kendall_tau(&[1.0, 2.0], &[1.0]).is_err());
        assert!(kendall_tau(&[f64::NAN, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn tau_handles_signed_zero_and_infinity() {
        let t = kendall_tau(&[-0.0, 0.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        let u = kendall_tau(&[0.0, 0.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t, u);
        let v = kendall_tau(&[f64::NEG_INFINITY, -3.0, -1.0], &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn bins_partition() {
        let sizes: Vec<usize> = decile_bins(27).iter().map(|r| r.len()).collect();
        assert_eq!(sizes, vec![2, 3, 3, 2, 3, 3, 2, 3, 3, 3]);
        assert_eq!(decile_bins(5).iter().filter(|r| r.is_empty()).count(), 5);
    }

    #[test]
    fn quartiles() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.min, s.max, s.mean, s.median), (1.0, 4.0, 2.5, 2.5));
        assert_eq!((s.q1, s.q3), (1.75, 3.25));
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn tau_text() {
        assert_eq!(fmt_tau(None), "NA");
        assert_eq!(fmt_tau(Some(0.5)), "0.500000");
    }
}
