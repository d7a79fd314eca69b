mod common;

use geomext_core::data::{polar_all, simulate, CopulaSpec, Margin};
use geomext_core::threshold::{check_loss, check_score, fold_indices};
use geomext_core::{Kernel, ThresholdModel, ThresholdParams};
use rand::Rng;

fn params(tau: f64, h_r: f64, h_w: f64, kernel: Kernel) -> ThresholdParams {
    ThresholdParams { tau, h_r, h_w, kernel }
}

fn benchmark(k: usize, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let rows = simulate(&CopulaSpec::benchmark(k).unwrap(), Margin::Exponential, n, &mut common::rng(seed)).unwrap();
    polar_all(&rows, Margin::Exponential).unwrap()
}

fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[test]
fn single_point_median() {
    let m = ThresholdModel::new(ThresholdParams::default(), 2, &[3.0], &[0.4, 0.6]).unwrap();
    assert!((m.conditional_cdf(3.0, &[0.4, 0.6]).unwrap() - 0.5).abs() < 1e-15);
    assert!((m.conditional_cdf(1e6, &[0.4, 0.6]).unwrap() - 1.0).abs() < 1e-15);
    assert!(m.conditional_cdf(1e-9, &[0.4, 0.6]).unwrap() < 1e-12);
}

#[test]
fn three_point_weighted_sum() {
    let radii = [1.0, 2.0, 1.5];
    let dirs = [[0.2, 0.8], [0.25, 0.75], [0.3, 0.7]];
    let flat: Vec<f64> = dirs.iter().flatten().copied().collect();
    let h = 0.05;
    let m = ThresholdModel::new(params(0.5, h, h, Kernel::Gaussian), 2, &radii, &flat).unwrap();
    let w = [0.24, 0.76];
    for r in [0.9, 1.2, 1.5, 1.9, 2.3] {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..3 {
            let d2: f64 = (0..2).map(|j| (w[j] - dirs[i][j]).powi(2)).sum();
            let k = (-d2 / (2.0 * h * h)).exp();
            num += k * phi((r - radii[i]) / h);
            den += k;
        }
        assert!((m.conditional_cdf(r, &w).unwrap() - num / den).abs() < 1e-12);
    }
}

#[test]
fn constant_radii_median() {
    let radii = vec![5.0; 20];
    let flat: Vec<f64> = (0..20).flat_map(|i| [i as f64 / 19.0, 1.0 - i as f64 / 19.0]).collect();
    let m = ThresholdModel::new(params(0.5, 0.05, 0.05, Kernel::Gaussian), 2, &radii, &flat).unwrap();
    assert!((m.quantile(&[0.5, 0.5]).unwrap() - 5.0).abs() < 1e-8);
}

#[test]
fn inversion_and_monotonicity() {
    let (radii, dirs) = benchmark(3, 2000, 1);
    let levels = [0.9, 0.95, 0.99];
    let models: Vec<ThresholdModel> = levels
        .iter()
        .map(|&t| ThresholdModel::new(params(t, 0.05, 0.05, Kernel::Gaussian), 2, &radii, &dirs).unwrap())
        .collect();
    for i in 0..=20 {
        let w = [i as f64 / 20.0, 1.0 - i as f64 / 20.0];
        let q: Vec<f64> = models.iter().map(|m| m.quantile(&w).unwrap()).collect();
        for (m, &r) in models.iter().zip(&q) {
            assert!((m.conditional_cdf(r, &w).unwrap() - m.tau()).abs() < 1e-8);
        }
        assert!(q[0] <= q[1] && q[1] <= q[2]);
        let mut last = 0.0;
        for k in 0..200 {
            let c = models[1].conditional_cdf(k as f64 * 0.1, &w).unwrap();
            assert!(c >= last);
            last = c;
        }
    }
}

#[test]
fn matches_binned_quantiles() {
    let (radii, dirs) = benchmark(3, 5000, 2);
    let m = ThresholdModel::new(params(0.95, 0.05, 0.05, Kernel::Gaussian), 2, &radii, &dirs).unwrap();
    for b in 0..10 {
        let (lo, hi) = (b as f64 / 10.0, (b + 1) as f64 / 10.0);
        let mut rs: Vec<f64> = (0..radii.len()).filter(|&i| dirs[2 * i] >= lo && dirs[2 * i] < hi).map(|i| radii[i]).collect();
        if rs.len() < 200 {
            continue;
        }
        rs.sort_by(f64::total_cmp);
        let emp = rs[(0.95 * rs.len() as f64) as usize];
        let mid = 0.5 * (lo + hi);
        let kde = m.quantile(&[mid, 1.0 - mid]).unwrap();
        assert!((kde - emp).abs() < 0.15 * emp, "bin {b}: {kde} vs {emp}");
    }
}

#[test]
fn exceedance_fraction_near_one_minus_tau() {
    let (radii, dirs) = benchmark(3, 5000, 3);
    let m = ThresholdModel::new(ThresholdParams::default(), 2, &radii, &dirs).unwrap();
    let count = (0..radii.len()).filter(|&i| radii[i] > m.quantile(&dirs[2 * i..2 * i + 2]).unwrap()).count();
    let frac = count as f64 / radii.len() as f64;
    let se = (0.05f64 * 0.95 / radii.len() as f64).sqrt();
    assert!((frac - 0.05).abs() <= 3.0 * se, "{frac}");
}

#[test]
fn kernels_agree() {
    let (radii, dirs) = benchmark(1, 5000, 4);
    let g = ThresholdModel::new(params(0.95, 0.05, 0.05, Kernel::Gaussian), 2, &radii, &dirs).unwrap();
    let e = ThresholdModel::new(params(0.95, 0.1, 0.1, Kernel::Epanechnikov), 2, &radii, &dirs).unwrap();
    let mut rel: Vec<f64> = (1..20)
        .map(|i| {
            let w = [i as f64 / 20.0, 1.0 - i as f64 / 20.0];
            let a = g.quantile(&w).unwrap();
            (a - e.quantile(&w).unwrap()).abs() / a
        })
        .collect();
    rel.sort_by(f64::total_cmp);
    assert!(rel[rel.len() / 2] <= 0.05, "{rel:?}");
}

#[test]
fn sparse_epanechnikov_region_is_an_error() {
    let m = ThresholdModel::new(params(0.5, 0.05, 0.01, Kernel::Epanechnikov), 2, &[1.0, 2.0], &[0.0, 1.0, 0.1, 0.9]).unwrap();
    assert!(m.quantile(&[0.9, 0.1]).is_err());
}

#[test]
fn true_quantile_has_smaller_check_loss() {
    let mut rng = common::rng(6);
    let tau = 0.95;
    let q = -(0.05f64).ln();
    let xs: Vec<f64> = (0..200_000).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let loss = |p: f64| xs.iter().map(|&x| check_loss(x, p, tau)).sum::<f64>() / xs.len() as f64;
    for f in [0.8, 0.9, 1.1, 1.25] {
        assert!(loss(q) < loss(f * q));
    }
    assert!(check_loss(1.0, 2.0, tau) >= 0.0);
}

#[test]
fn fold_split_is_seeded() {
    let a = fold_indices(103, 5, &mut common::rng(1)).unwrap();
    let b = fold_indices(103, 5, &mut common::rng(1)).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|f| f.len() == 20));
    assert!(fold_indices(3, 5, &mut common::rng(1)).is_err());
}

#[test]
fn radial_bandwidth_matters_little() {
    let (radii, dirs) = benchmark(1, 2000, 7);
    let grid: Vec<ThresholdParams> =
        [0.01, 0.05, 0.1, 0.25, 0.5].iter().map(|&h| params(0.95, h, 0.05, Kernel::Gaussian)).collect();
    let rows = check_score(2, &radii, &dirs, &grid, 5, &mut common::rng(2)).unwrap();
    let s: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let max = s.iter().cloned().fold(f64::MIN, f64::max);
    let min = s.iter().cloned().fold(f64::MAX, f64::min);
    assert!(max - min <= 0.02 * min, "{s:?}");
}
