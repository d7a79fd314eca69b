//! Gamma distribution with integer shape, normal tails and goodness of fit.

use crate::error::{invalid, Error, Result};
use crate::roots::brent_root;

pub fn ln_factorial(k: usize) -> f64 {
    libm::lgamma(k as f64 + 1.0)
}

fn check(shape: usize, rate: f64) {
    debug_assert!(shape >= 1);
    debug_assert!(rate > 0.0);
}

/// Log density of Gamma(shape, rate) at `x > 0`.
pub fn gamma_ln_pdf(x: f64, shape: usize, rate: f64) -> f64 {
    check(shape, rate);
    if x <= 0.0 {
        return if shape == 1 && x == 0.0 { libm::log(rate) } else { f64::NEG_INFINITY };
    }
    let m = shape as f64;
    m * libm::log(rate) + (m - 1.0) * libm::log(x) - rate * x - ln_factorial(shape - 1)
}

/// Log survival function; with integer shape this is the Poisson sum
/// `exp(-y) * sum_{k<shape} y^k / k!` with `y = rate * x`.
pub fn gamma_ln_sf(x: f64, shape: usize, rate: f64) -> f64 {
    check(shape, rate);
    let y = rate * x;
    if y <= 0.0 {
        return 0.0;
    }
    if y.is_infinite() {
        return f64::NEG_INFINITY;
    }
    let ly = libm::log(y);
    let lead = (0..shape).map(|k| k as f64 * ly - ln_factorial(k)).fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for k in 0..shape {
        s += libm::exp(k as f64 * ly - ln_factorial(k) - lead);
    }
    -y + lead + libm::log(s)
}

pub fn gamma_sf(x: f64, shape: usize, rate: f64) -> f64 {
    libm::exp(gamma_ln_sf(x, shape, rate))
}

pub fn gamma_cdf(x: f64, shape: usize, rate: f64) -> f64 {
    check(shape, rate);
    let y = rate * x;
    if y <= 0.0 {
        return 0.0;
    }
    if y < shape as f64 {
        // lower tail series sum_{k>=shape} y^k/k! e^{-y}
        let mut term = libm::exp(shape as f64 * libm::log(y) - ln_factorial(shape) - y);
        let mut sum = term;
        let mut k = shape;
        while term > 1e-18 * sum {
            k += 1;
            term *= y / k as f64;
            sum += term;
        }
        sum.min(1.0)
    } else {
        -libm::expm1(gamma_ln_sf(x, shape, rate))
    }
}

/// Smallest `x >= lower` with `ln S(x) = ln_target`.
pub fn gamma_ln_isf(ln_target: f64, shape: usize, rate: f64, lower: f64) -> Result<f64> {
    check(shape, rate);
    if !(ln_target <= 0.0) {
        return Err(invalid("log survival target must be non-positive"));
    }
    let ln_lo = gamma_ln_sf(lower, shape, rate);
    if ln_target >= ln_lo {
        return Ok(lower);
    }
    if ln_target == f64::NEG_INFINITY {
        return Err(Error::UntenableTruncation);
    }
    let scale = 1.0 / rate;
    let mut hi = lower + scale * (shape as f64 - ln_target);
    let mut tries = 0;
    while gamma_ln_sf(hi, shape, rate) > ln_target {
        hi = lower + 2.0 * (hi - lower);
        tries += 1;
        if tries > 200 {
            return Err(Error::NoBracket);
        }
    }
    let x = brent_root(|r| gamma_ln_sf(r, shape, rate) - ln_target, lower, hi, 1e-15 * hi, 300)?;
    Ok(x.max(lower))
}

/// Quantile function of Gamma(shape, rate).
pub fn gamma_quantile(p: f64, shape: usize, rate: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(invalid("probability must lie in [0, 1)"));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return gamma_ln_isf(libm::log1p(-p), shape, rate, 0.0);
    }
    let mut hi = shape as f64 / rate;
    while gamma_cdf(hi, shape, rate) < p {
        hi *= 2.0;
    }
    brent_root(|x| gamma_cdf(x, shape, rate) - p, 0.0, hi, 1e-15 * hi, 300)
}

/// Standard normal upper tail probability.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / core::f64::consts::SQRT_2)
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// Kolmogorov-Smirnov distance between sorted samples and a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic Kolmogorov p-value with the Stephens small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = libm::sqrt(n as f64);
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let t = libm::exp(-2.0 * kf * kf * lambda * lambda);
        p += if k % 2 == 1 { 2.0 * t } else { -2.0 * t };
        if t < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}
