#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point on the simplex via normalised exponentials.
pub fn uniform_simplex(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..d).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Erlang survival function, summed term by term.
pub fn erlang_sf(x: f64, shape: usize, rate: f64) -> f64 {
    let y = rate * x;
    let mut term = 1.0;
    let mut s = 1.0;
    for k in 1..shape {
        term *= y / k as f64;
        s += term;
    }
    s * (-y).exp()
}

pub fn erlang_pdf(x: f64, shape: usize, rate: f64) -> f64 {
    let fact: f64 = (1..shape).map(|k| k as f64).product();
    rate.powi(shape as i32) * x.powi(shape as i32 - 1) * (-rate * x).exp() / fact
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Bisection root of an increasing function.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Kolmogorov-Smirnov distance of a sample from a continuous CDF.
pub fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Solves a small dense linear system by Gaussian elimination with pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Circumcentre and squared radius of a simplex given by its vertices.
pub fn circumsphere(v: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let k = v[0].len();
    let a: Vec<Vec<f64>> = (1..=k).map(|i| (0..k).map(|j| 2.0 * (v[i][j] - v[0][j])).collect()).collect();
    let b: Vec<f64> = (1..=k)
        .map(|i| (0..k).map(|j| v[i][j] * v[i][j] - v[0][j] * v[0][j]).sum())
        .collect();
    let c = solve(a, b);
    let r2 = (0..k).map(|j| (c[j] - v[0][j]).powi(2)).sum();
    (c, r2)
}
