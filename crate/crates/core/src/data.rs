//! Copula simulators, marginal transforms and polar decomposition.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use alloc::format;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gauge::{exchangeable_correlation, AlComponent, ParametricGauge};
use crate::linalg;
use crate::roots::brent_min;
use crate::special::{normal_cdf, normal_sf};

/// Target marginal distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Margin {
    #[default]
    Exponential,
    Laplace,
}

/// Tail probability of a uniform variable kept on both sides for precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tail {
    /// `ln P(X > x)`.
    pub ln_sf: f64,
    /// `P(X <= x)`.
    pub cdf: f64,
}

impl Tail {
    pub fn from_cdf(u: f64) -> Tail {
        Tail { ln_sf: libm::log1p(-u), cdf: u }
    }

    pub fn from_sf(p: f64) -> Tail {
        Tail { ln_sf: libm::log(p), cdf: 1.0 - p }
    }
}

impl Margin {
    /// Value of the margin with the given tail probabilities.
    pub fn quantile(self, t: Tail) -> f64 {
        match self {
            Margin::Exponential => -t.ln_sf,
            Margin::Laplace => {
                if t.cdf < 0.5 {
                    libm::log(2.0 * t.cdf)
                } else {
                    -(libm::log(2.0) + t.ln_sf)
                }
            }
        }
    }

    pub fn cdf(self, x: f64) -> f64 {
        match self {
            Margin::Exponential => {
                if x <= 0.0 {
                    0.0
                } else {
                    -libm::expm1(-x)
                }
            }
            Margin::Laplace => {
                if x < 0.0 {
                    0.5 * libm::exp(x)
                } else {
                    1.0 - 0.5 * libm::exp(-x)
                }
            }
        }
    }

    pub fn sf(self, x: f64) -> f64 {
        match self {
            Margin::Exponential => {
                if x <= 0.0 {
                    1.0
                } else {
                    libm::exp(-x)
                }
            }
            Margin::Laplace => {
                if x < 0.0 {
                    1.0 - 0.5 * libm::exp(x)
                } else {
                    0.5 * libm::exp(-x)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    /// Zero-based coordinates that can be large together.
    pub members: Vec<usize>,
    pub alpha: f64,
}

/// Dependence model for simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CopulaSpec {
    Logistic { dim: usize, alpha: f64 },
    /// Row-major correlation matrix.
    Gaussian { dim: usize, correlation: Vec<f64> },
    InvertedLogistic { dim: usize, alpha: f64 },
    AsymmetricLogistic { dim: usize, components: Vec<ComponentSpec> },
    /// Equal-probability choice between two models unless `weight` says
    /// otherwise; `weight` is the probability of the first.
    Mixture { first: alloc::boxed::Box<CopulaSpec>, second: alloc::boxed::Box<CopulaSpec>, weight: f64 },
}

fn comp(members: &[usize], alpha: f64) -> ComponentSpec {
    ComponentSpec { members: members.to_vec(), alpha }
}

impl CopulaSpec {
    /// The seven benchmark distributions, numbered 1 to 7.
    pub fn benchmark(k: usize) -> Result<CopulaSpec> {
        Ok(match k {
            1 => CopulaSpec::Logistic { dim: 2, alpha: 0.4 },
            2 => CopulaSpec::Logistic { dim: 2, alpha: 0.8 },
            3 => CopulaSpec::Gaussian { dim: 2, correlation: exchangeable_correlation(2, 0.8) },
            4 => CopulaSpec::InvertedLogistic { dim: 2, alpha: 0.7 },
            5 => CopulaSpec::AsymmetricLogistic {
                dim: 3,
                components: vec![comp(&[0, 1], 0.4), comp(&[0, 2], 0.4), comp(&[1, 2], 0.4)],
            },
            6 => CopulaSpec::AsymmetricLogistic {
                dim: 3,
                components: vec![comp(&[0], 0.4), comp(&[0, 1], 0.4), comp(&[1, 2], 0.4)],
            },
            7 => CopulaSpec::Mixture {
                first: alloc::boxed::Box::new(CopulaSpec::AsymmetricLogistic {
                    dim: 3,
                    components: vec![comp(&[0, 1], 0.4), comp(&[0, 1, 2], 0.4)],
                }),
                second: alloc::boxed::Box::new(CopulaSpec::Gaussian { dim: 3, correlation: exchangeable_correlation(3, 0.6) }),
                weight: 0.5,
            },
            _ => return Err(invalid(format!("no benchmark distribution {k}"))),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            CopulaSpec::Logistic { dim, .. }
            | CopulaSpec::Gaussian { dim, .. }
            | CopulaSpec::InvertedLogistic { dim, .. }
            | CopulaSpec::AsymmetricLogistic { dim, .. } => *dim,
            CopulaSpec::Mixture { first, .. } => first.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if !(2..=crate::simplex::MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        match self {
            CopulaSpec::Logistic { alpha, .. } | CopulaSpec::InvertedLogistic { alpha, .. } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(invalid("alpha must lie in (0, 1]"));
                }
            }
            CopulaSpec::Gaussian { .. } | CopulaSpec::AsymmetricLogistic { .. } => {
                self.gauge(Margin::Exponential)?;
            }
            CopulaSpec::Mixture { first, second, weight } => {
                first.validate()?;
                second.validate()?;
                if first.dim() != second.dim() {
                    return Err(invalid("mixture components must share a dimension"));
                }
                if !(*weight > 0.0 && *weight < 1.0) {
                    return Err(invalid("mixture weight must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }

    /// Limiting gauge of the model in the given margins.
    pub fn gauge(&self, margin: Margin) -> Result<ParametricGauge> {
        if margin == Margin::Laplace {
            return match self {
                CopulaSpec::Gaussian { dim, correlation } => ParametricGauge::gaussian_laplace(*dim, correlation),
                _ => Err(invalid("only the Gaussian model has a Laplace-margin gauge")),
            };
        }
        match self {
            CopulaSpec::Logistic { dim, alpha } => ParametricGauge::logistic(*dim, *alpha),
            CopulaSpec::Gaussian { dim, correlation } => ParametricGauge::gaussian(*dim, correlation),
            CopulaSpec::InvertedLogistic { dim, alpha } => ParametricGauge::inverted_logistic(*dim, *alpha),
            CopulaSpec::AsymmetricLogistic { dim, components } => ParametricGauge::asymmetric_logistic(
                *dim,
                components.iter().map(|c| AlComponent { members: c.members.clone(), alpha: c.alpha }).collect(),
            ),
            CopulaSpec::Mixture { first, second, .. } => ParametricGauge::mixture(first.gauge(margin)?, second.gauge(margin)?),
        }
    }

    /// Draws one observation as per-coordinate tail probabilities.
    pub fn sample_tails<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [Tail]) -> Result<()> {
        match self {
            CopulaSpec::Logistic { dim, alpha } => {
                let s = positive_stable(*alpha, rng);
                for t in out.iter_mut().take(*dim) {
                    let e: f64 = Exp1.sample(rng);
                    let v = libm::pow(e / s, *alpha);
                    *t = Tail { ln_sf: libm::log(-libm::expm1(-v)), cdf: libm::exp(-v) };
                }
            }
            CopulaSpec::InvertedLogistic { dim, alpha } => {
                let s = positive_stable(*alpha, rng);
                for t in out.iter_mut().take(*dim) {
                    let e: f64 = Exp1.sample(rng);
                    let v = libm::pow(e / s, *alpha);
                    *t = Tail { ln_sf: -v, cdf: -libm::expm1(-v) };
                }
            }
            CopulaSpec::Gaussian { dim, correlation } => {
                let l = linalg::cholesky(correlation, *dim)?;
                let z: Vec<f64> = (0..*dim).map(|_| StandardNormal.sample(rng)).collect();
                for i in 0..*dim {
                    let x: f64 = (0..=i).map(|k| l[i * dim + k] * z[k]).sum();
                    *out.get_mut(i).ok_or_else(|| invalid("output too short"))? =
                        Tail { ln_sf: libm::log(normal_sf(x)), cdf: normal_cdf(x) };
                }
            }
            CopulaSpec::AsymmetricLogistic { dim, components } => {
                // reciprocal Frechet value per coordinate is the minimum of
                // the weighted component draws
                let mut inv = vec![f64::INFINITY; *dim];
                for c in components {
                    let s = positive_stable(c.alpha, rng);
                    for &j in &c.members {
                        let e: f64 = Exp1.sample(rng);
                        let weight = 1.0 / components.iter().filter(|o| o.members.contains(&j)).count() as f64;
                        inv[j] = inv[j].min(libm::pow(e / s, c.alpha) / weight);
                    }
                }
                for j in 0..*dim {
                    out[j] = Tail { ln_sf: libm::log(-libm::expm1(-inv[j])), cdf: libm::exp(-inv[j]) };
                }
            }
            CopulaSpec::Mixture { first, second, weight } => {
                if rng.random::<f64>() < *weight {
                    first.sample_tails(rng, out)?;
                } else {
                    second.sample_tails(rng, out)?;
                }
            }
        }
        Ok(())
    }

    /// Exact probability of the box `[lower, upper]` in exponential margins
    /// for the models with a closed-form distribution function.
    pub fn box_probability(&self, lower: &[f64], upper: &[f64]) -> Option<f64> {
        let d = self.dim();
        if lower.len() != d || upper.len() != d {
            return None;
        }
        let exponent: &dyn Fn(&[f64]) -> f64 = match self {
            CopulaSpec::Logistic { alpha, .. } => &move |y: &[f64]| logistic_exponent(y, *alpha),
            CopulaSpec::AsymmetricLogistic { components, .. } => &move |y: &[f64]| {
                components
                    .iter()
                    .map(|c| {
                        let s: f64 = c
                            .members
                            .iter()
                            .map(|&j| {
                                let w = 1.0 / components.iter().filter(|o| o.members.contains(&j)).count() as f64;
                                libm::pow(w * y[j], 1.0 / c.alpha)
                            })
                            .sum();
                        libm::pow(s, c.alpha)
                    })
                    .sum()
            },
            CopulaSpec::InvertedLogistic { alpha, .. } => {
                // survival function exp(-V(1/x)) with inclusion-exclusion
                let alpha = *alpha;
                let mut total = 0.0;
                let mut y = vec![0.0; d];
                for mask in 0u32..(1 << d) {
                    let mut sign = 1.0;
                    let mut infinite = false;
                    for j in 0..d {
                        if mask & (1 << j) != 0 {
                            sign = -sign;
                            if upper[j].is_infinite() {
                                infinite = true;
                            }
                            y[j] = upper[j];
                        } else {
                            y[j] = lower[j];
                        }
                    }
                    if infinite {
                        continue;
                    }
                    total += sign * libm::exp(-logistic_exponent(&y, alpha));
                }
                return Some(total.max(0.0));
            }
            _ => return None,
        };
        // distribution function exp(-V) with 1/z_j = -ln(1 - e^{-x_j})
        let mut total = 0.0;
        let mut y = vec![0.0; d];
        for mask in 0u32..(1 << d) {
            let mut sign = 1.0;
            let mut zero = false;
            for j in 0..d {
                let x = if mask & (1 << j) != 0 {
                    sign = -sign;
                    lower[j]
                } else {
                    upper[j]
                };
                if x <= 0.0 {
                    zero = true;
                }
                y[j] = if x.is_infinite() { 0.0 } else { -libm::log(-libm::expm1(-x)) };
            }
            if zero {
                continue;
            }
            total += sign * libm::expm1(-exponent(&y));
        }
        Some(total.max(0.0))
    }
}

fn logistic_exponent(y: &[f64], alpha: f64) -> f64 {
    libm::pow(y.iter().map(|&v| libm::pow(v, 1.0 / alpha)).sum::<f64>(), alpha)
}

/// Positive stable variable with Laplace transform `exp(-t^alpha)`.
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    let u: f64 = core::f64::consts::PI * rng.random::<f64>();
    let u = if u == 0.0 { f64::MIN_POSITIVE } else { u };
    let e: f64 = Exp1.sample(rng);
    let a = libm::pow(libm::sin((1.0 - alpha) * u) / e, (1.0 - alpha) / alpha);
    a * libm::sin(alpha * u) / libm::pow(libm::sin(u), 1.0 / alpha)
}

/// `n` draws of `spec` in the requested margins.
pub fn simulate<R: Rng + ?Sized>(spec: &CopulaSpec, margin: Margin, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let d = spec.dim();
    let mut tails = vec![Tail { ln_sf: 0.0, cdf: 0.0 }; d];
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        spec.sample_tails(rng, &mut tails)?;
        rows.push(tails.iter().map(|&t| margin.quantile(t)).collect());
    }
    Ok(rows)
}

/// Generalised Pareto distribution for excesses over a threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gpd {
    pub scale: f64,
    pub shape: f64,
}

impl Gpd {
    /// `ln P(Y > y)`.
    pub fn ln_sf(&self, y: f64) -> f64 {
        let z = y / self.scale;
        if libm::fabs(self.shape) < 1e-12 {
            return -z;
        }
        let t = 1.0 + self.shape * z;
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        -libm::log1p(self.shape * z) / self.shape
    }

    pub fn log_likelihood(&self, ys: &[f64]) -> f64 {
        let n = ys.len() as f64;
        if !(self.scale > 0.0) {
            return f64::NEG_INFINITY;
        }
        let mut s = -n * libm::log(self.scale);
        for &y in ys {
            let z = y / self.scale;
            if libm::fabs(self.shape) < 1e-12 {
                s -= z;
            } else {
                let t = 1.0 + self.shape * z;
                if t <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                s -= (1.0 + 1.0 / self.shape) * libm::log1p(self.shape * z);
            }
        }
        s
    }

    /// Profile maximum likelihood with the shape restricted to (-0.9, 1).
    pub fn fit(ys: &[f64]) -> Result<Gpd> {
        if ys.len() < 2 || ys.iter().any(|&y| !(y >= 0.0)) {
            return Err(Error::GpdFit("needs non-negative excesses".into()));
        }
        let max = ys.iter().cloned().fold(0.0, f64::max);
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        if !(mean > 0.0) {
            return Err(Error::GpdFit("excesses are all zero".into()));
        }
        let profile = |xi: f64| -> (f64, f64) {
            let lo = if xi < 0.0 { -xi * max * (1.0 + 1e-9) } else { 0.0 };
            let lo = lo.max(mean * 1e-6);
            let hi = (mean * 100.0).max(lo * 10.0);
            let (ls, v) = brent_min(
                |ls| -Gpd { scale: libm::exp(ls), shape: xi }.log_likelihood(ys),
                libm::log(lo),
                libm::log(hi),
                1e-10,
                200,
            );
            (libm::exp(ls), v)
        };
        let (xi, v) = brent_min(|xi| profile(xi).1, -0.9, 1.0, 1e-9, 200);
        let (scale, _) = profile(xi);
        if !v.is_finite() {
            return Err(Error::GpdFit("likelihood is not finite".into()));
        }
        if xi <= -0.9 + 1e-6 {
            return Err(Error::GpdFit("shape estimate at the lower limit".into()));
        }
        Ok(Gpd { scale, shape: xi })
    }
}

/// Empirical distribution function below a high quantile spliced with a
/// generalised Pareto tail above it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginTransform {
    pub sorted: Vec<f64>,
    pub q: f64,
    pub threshold: f64,
    pub cdf_at_threshold: f64,
    pub gpd: Gpd,
}

/// Minimum number of observations above the splice point.
pub const MIN_TAIL_COUNT: usize = 30;

impl MarginTransform {
    pub fn fit(column: &[f64], q: f64) -> Result<MarginTransform> {
        if !(q > 0.0 && q < 1.0) {
            return Err(invalid("tail quantile must lie in (0, 1)"));
        }
        if column.iter().any(|x| !x.is_finite()) {
            return Err(invalid("data must be finite"));
        }
        let mut sorted = column.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let k = libm::floor(q * n as f64) as usize;
        if k == 0 {
            return Err(invalid("too few observations"));
        }
        let threshold = sorted[k - 1];
        let ys: Vec<f64> = sorted.iter().filter(|&&x| x > threshold).map(|&x| x - threshold).collect();
        if ys.len() < MIN_TAIL_COUNT {
            return Err(Error::GpdFit(format!("only {} observations above the splice point", ys.len())));
        }
        let gpd = Gpd::fit(&ys)?;
        let mut t = MarginTransform { sorted, q, threshold, cdf_at_threshold: 0.0, gpd };
        t.cdf_at_threshold = t.empirical_cdf(threshold);
        Ok(t)
    }

    /// Average-rank empirical distribution function scaled by `n + 1`.
    pub fn empirical_cdf(&self, x: f64) -> f64 {
        let below = self.sorted.partition_point(|&v| v < x);
        let upto = self.sorted.partition_point(|&v| v <= x);
        let ties = upto - below;
        let rank = if ties == 0 { below as f64 } else { below as f64 + (ties as f64 + 1.0) / 2.0 };
        rank / (self.sorted.len() as f64 + 1.0)
    }

    pub fn tail(&self, x: f64) -> Tail {
        if x <= self.threshold {
            Tail::from_cdf(self.empirical_cdf(x))
        } else {
            let ln_sf = libm::log1p(-self.cdf_at_threshold) + self.gpd.ln_sf(x - self.threshold);
            Tail { ln_sf, cdf: -libm::expm1(ln_sf) }
        }
    }

    pub fn transform(&self, x: f64, margin: Margin) -> f64 {
        margin.quantile(self.tail(x))
    }
}

/// Per-column transforms of a raw data matrix to the requested margins.
pub fn transform_margins(rows: &[Vec<f64>], q: f64, margin: Margin) -> Result<(Vec<Vec<f64>>, Vec<MarginTransform>)> {
    if rows.is_empty() {
        return Err(invalid("no data"));
    }
    let d = rows[0].len();
    if rows.len() < d {
        return Err(invalid("fewer observations than variables"));
    }
    if margin == Margin::Laplace && d != 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    let mut ts = Vec::with_capacity(d);
    for j in 0..d {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        ts.push(MarginTransform::fit(&col, q).map_err(|e| match e {
            Error::GpdFit(m) => Error::GpdFit(format!("column {j}: {m}")),
            other => other,
        })?);
    }
    let out = rows.iter().map(|r| r.iter().zip(&ts).map(|(&x, t)| t.transform(x, margin)).collect()).collect();
    Ok((out, ts))
}

/// L1 radius and direction of a point. Exponential-margin points must be
/// non-negative.
pub fn polar(x: &[f64], margin: Margin) -> Result<(f64, Vec<f64>)> {
    if margin == Margin::Exponential && x.iter().any(|&v| !(v >= 0.0)) {
        return Err(invalid("exponential-margin data must be non-negative"));
    }
    let r: f64 = x.iter().map(|v| libm::fabs(*v)).sum();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok((r, x.iter().map(|v| v / r).collect()))
}

/// Radii and flattened directions of every row.
pub fn polar_all(rows: &[Vec<f64>], margin: Margin) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut radii = Vec::with_capacity(rows.len());
    let mut dirs = Vec::with_capacity(rows.len() * rows.first().map_or(0, |r| r.len()));
    for row in rows {
        let (r, w) = polar(row, margin)?;
        radii.push(r);
        dirs.extend_from_slice(&w);
    }
    Ok((radii, dirs))
}

/// Column names used when none are given.
pub fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}
