mod common;

use common::*;
use ntk_lab::init::{init_weights, InitScheme};
use ntk_lab::linalg::{frobenius_norm, jacobi_eigen, matrix_mean, pearson_correlation, DenseMatrix};
use ntk_lab::metrics::{f_norm_metric, label_matrix, lga_metric, mean_metric, ncn_metric};
use ntk_lab::ntk::KernelMatrix;
use ntk_lab::rng::Rng;

#[test]
fn jacobi_on_gram_matrix_has_small_residuals() {
    let mut rng = Rng::new(1);
    let a = random_psd(5, &mut rng);
    let e = jacobi_eigen(&a, 1e-10).unwrap();
    let bound = 1e-8 * frobenius_norm(&a).max(1.0);
    assert!(eigen_residuals(&a, &e).iter().all(|&r| r <= bound));
    assert!(orthonormality_error(&e) <= 1e-8);
}

#[test]
fn jacobi_matches_characteristic_polynomial_roots() {
    let mut rng = Rng::new(2);
    for _ in 0..20 {
        let a = random_symmetric(3, &mut rng);
        let e = jacobi_eigen(&a, 1e-10).unwrap();
        for (x, y) in e.eigenvalues.iter().zip(eigen3_bisection(&a)) {
            assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
        }
    }
}

#[test]
fn frobenius_equals_spectral_norm_identity() {
    let mut rng = Rng::new(3);
    let a = random_psd(4, &mut rng);
    let e = jacobi_eigen(&a, 1e-10).unwrap();
    let s = e.eigenvalues.iter().map(|l| l * l).sum::<f64>().sqrt();
    assert!((frobenius_norm(&a) - s).abs() <= 1e-9 * s);
}

#[test]
fn pearson_matches_two_pass() {
    let mut rng = Rng::new(4);
    let a = DenseMatrix::new(6, 6, (0..36).map(|_| rng.normal()).collect()).unwrap();
    let b = DenseMatrix::new(6, 6, (0..36).map(|_| rng.normal()).collect()).unwrap();
    let got = pearson_correlation(&a, &b).unwrap();
    assert!((got - pearson_two_pass(a.as_slice(), b.as_slice())).abs() <= 1e-12);
}

#[test]
fn mean_matches_double_loop() {
    let mut rng = Rng::new(5);
    let a = DenseMatrix::new(3, 3, (0..9).map(|_| rng.normal()).collect()).unwrap();
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a.get(i, j);
        }
    }
    assert!((matrix_mean(&a).unwrap() - s / 9.0).abs() <= 1e-14);
}

#[test]
fn kaiming_empirical_std() {
    let w = init_weights(10000, 1, InitScheme::Kaiming, &mut Rng::new(6)).unwrap();
    let v = w.as_slice();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    let target = (2.0f64 / 10000.0).sqrt();
    assert!((std - target).abs() <= 0.05 * target, "{std} vs {target}");
}

#[test]
fn metric_oracles_on_random_kernels() {
    let mut rng = Rng::new(7);
    let m = random_psd(3, &mut rng);
    let k = KernelMatrix::new(m.clone()).unwrap();
    let roots = eigen3_bisection(&m);
    let ncn = ncn_metric(&k).unwrap();
    assert!(!ncn.degenerate);
    assert!((ncn.value - (-roots[2] / roots[0])).abs() <= 1e-8 * ncn.value.abs());

    let s = roots.iter().map(|l| l * l).sum::<f64>().sqrt();
    assert!((f_norm_metric(&k).value - s).abs() <= 1e-9 * s);

    let mut loop_sum = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            loop_sum += m.get(i, j);
        }
    }
    assert!((mean_metric(&k).value - loop_sum / 9.0).abs() <= 1e-14);
}

#[test]
fn checkerboard_label_matrix() {
    let lm = label_matrix(&[0, 1, 0, 1]).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let expected = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(lm.matrix().get(i, j), expected);
        }
    }
}

#[test]
fn lga_is_pearson_with_label_matrix() {
    let mut rng = Rng::new(8);
    let labels = [0, 0, 1, 1, 2, 2, 0, 1];
    let m = random_psd(8, &mut rng);
    let k = KernelMatrix::new(m.clone()).unwrap();
    let lga = lga_metric(&k, &labels).unwrap();
    let lm = label_matrix(&labels).unwrap();
    assert!((lga.value - pearson_two_pass(m.as_slice(), lm.matrix().as_slice())).abs() <= 1e-12);
    assert!((lga.value - pearson_correlation(&m, lm.matrix()).unwrap()).abs() <= 1e-12);
}
