//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

use ntk_lab::linalg::DenseMatrix;
use ntk_lab::net::{Mode, Network};
use ntk_lab::rng::Rng;

/// Central differences of `f` at `x` with step `h`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Finite-difference gradient of the scalar readout of `net` at `x`.
pub fn fd_readout_gradient(net: &Network, x: &[f64], mode: Mode, h: f64) -> Vec<f64> {
    let base = net.clone();
    central_difference(
        |p| {
            let mut n = base.clone();
            n.params_mut().copy_from_slice(p);
            n.scalar_readout(x, mode).expect("forward")
        },
        net.params(),
        h,
    )
}

/// Worst `|fd - g| / |g|` over coordinates with `|g| > floor`.
pub fn max_relative_error(g: &[f64], fd: &[f64], floor: f64) -> f64 {
    g.iter()
        .zip(fd)
        .filter(|(a, _)| a.abs() > floor)
        .map(|(a, b)| (a - b).abs() / a.abs())
        .fold(0.0, f64::max)
}

/// Naive `J Jᵀ` with explicit loops.
pub fn gram(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|a| rows.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum()).collect())
        .collect()
}

/// Real roots of `det(A - λI)` for a symmetric 3x3 `A`, ascending. The
/// cubic is split at its critical points and each bracket is bisected.
pub fn eigen3_bisection(a: &DenseMatrix) -> [f64; 3] {
    let g = |i: usize, j: usize| a.get(i, j);
    let tr = g(0, 0) + g(1, 1) + g(2, 2);
    let c = g(0, 0) * g(1, 1) + g(0, 0) * g(2, 2) + g(1, 1) * g(2, 2) - g(0, 1) * g(1, 0) - g(0, 2) * g(2, 0)
        - g(1, 2) * g(2, 1);
    let det = g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1)) - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
        + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0));
    // p(λ) = λ³ - tr λ² + c λ - det, monotone outside its critical points.
    let p = |l: f64| ((l - tr) * l + c) * l - det;
    let bound = 1.0 + (0..3).map(|i| (0..3).map(|j| g(i, j).abs()).sum::<f64>()).fold(0.0, f64::max);
    let disc = (tr * tr - 3.0 * c).max(0.0).sqrt();
    let (d1, d2) = ((tr - disc) / 3.0, (tr + disc) / 3.0);
    let bisect = |mut lo: f64, mut hi: f64| {
        let rising = p(hi) >= p(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (p(mid) >= 0.0) == rising {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    [bisect(-bound, d1), bisect(d1, d2), bisect(d2, bound)]
}

/// Tau-b by enumerating every pair.
pub fn tau_pairs(xs: &[f64], ys: &[f64]) -> f64 {
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    let n = xs.len();
    for i in 0..n {
        for j in i + 1..n {
            let dx = xs[i] - xs[j];
            let dy = ys[i] - ys[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                conc += 1;
            } else {
                disc += 1;
            }
        }
    }
    (conc - disc) as f64 / (((conc + disc + tx) as f64) * ((conc + disc + ty) as f64)).sqrt()
}

/// Pearson correlation with separate mean and covariance passes.
pub fn pearson_two_pass(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

pub fn random_symmetric(n: usize, rng: &mut Rng) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.uniform(-1.0, 1.0);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

/// `BᵀB` for a random square `B`.
pub fn random_psd(n: usize, rng: &mut Rng) -> DenseMatrix {
    let b = DenseMatrix::new(n, n, (0..n * n).map(|_| rng.normal()).collect()).unwrap();
    let m = b.transpose().matmul(&b).unwrap();
    symmetrize(&m)
}

pub fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    let n = m.rows();
    let mut s = m.clone();
    for i in 0..n {
        for j in 0..n {
            s.set(i, j, 0.5 * (m.get(i, j) + m.get(j, i)));
        }
    }
    s
}

pub fn unit_vector(d: usize, rng: &mut Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}

/// `‖A v - λ v‖` for every eigenpair.
pub fn eigen_residuals(a: &DenseMatrix, e: &ntk_lab::linalg::EigenResult) -> Vec<f64> {
    (0..a.rows())
        .map(|k| {
            let v = e.vector(k);
            let av = a.matvec(&v);
            av.iter().zip(&v).map(|(x, y)| (x - e.eigenvalues[k] * y).powi(2)).sum::<f64>().sqrt()
        })
        .collect()
}

/// Largest `|VᵀV - I|` entry.
pub fn orthonormality_error(e: &ntk_lab::linalg::EigenResult) -> f64 {
    let n = e.eigenvalues.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d: f64 = e.vector(i).iter().zip(e.vector(j)).map(|(a, b)| a * b).sum();
            worst = worst.max((d - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}
