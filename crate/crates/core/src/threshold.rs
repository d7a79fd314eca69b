//! Kernel estimate of the conditional radial quantile given direction.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gauge::Gauge;
use crate::roots::brent_root;
use crate::special::{gamma_quantile, normal_cdf};

/// Conditional radial threshold as a function of direction.
pub trait RadialThreshold {
    fn threshold(&self, direction: &[f64]) -> Result<f64>;
}

/// The same threshold in every direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantThreshold(pub f64);

impl RadialThreshold for ConstantThreshold {
    fn threshold(&self, _: &[f64]) -> Result<f64> {
        Ok(self.0)
    }
}

/// Gamma quantile `F^{-1}(tau; d, g(w))` of a radial gauge model.
#[derive(Clone, Debug)]
pub struct GammaThreshold<G> {
    pub gauge: G,
    pub tau: f64,
}

impl<G: Gauge> RadialThreshold for GammaThreshold<G> {
    fn threshold(&self, direction: &[f64]) -> Result<f64> {
        let g = self.gauge.eval(direction)?;
        gamma_quantile(self.tau, self.gauge.dim(), g)
    }
}

impl<T: RadialThreshold + ?Sized> RadialThreshold for &T {
    fn threshold(&self, direction: &[f64]) -> Result<f64> {
        (**self).threshold(direction)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    /// Unnormalised angular weight for a squared distance (Gaussian) or a
    /// vector of scaled differences (product Epanechnikov).
    fn angular(self, diff: &[f64], h: f64) -> f64 {
        match self {
            Kernel::Gaussian => {
                let s: f64 = diff.iter().map(|d| d * d).sum();
                -s / (2.0 * h * h)
            }
            Kernel::Epanechnikov => {
                let mut p = 1.0;
                for d in diff {
                    let u = d / h;
                    if u.abs() >= 1.0 {
                        return f64::NEG_INFINITY;
                    }
                    p *= 0.75 * (1.0 - u * u);
                }
                libm::log(p)
            }
        }
    }

    /// Integrated radial kernel.
    pub fn cdf(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => normal_cdf(u),
            Kernel::Epanechnikov => {
                if u <= -1.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    0.75 * (u - u * u * u / 3.0) + 0.5
                }
            }
        }
    }

    /// Half-width beyond which the integrated kernel is 0 or 1.
    fn reach(self) -> f64 {
        match self {
            Kernel::Gaussian => 8.5,
            Kernel::Epanechnikov => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdParams {
    pub tau: f64,
    pub h_r: f64,
    pub h_w: f64,
    pub kernel: Kernel,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        ThresholdParams { tau: 0.95, h_r: 0.05, h_w: 0.05, kernel: Kernel::Gaussian }
    }
}

impl ThresholdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(invalid("tau must lie in (0, 1)"));
        }
        if !(self.h_r > 0.0 && self.h_w > 0.0) || !self.h_r.is_finite() || !self.h_w.is_finite() {
            return Err(invalid("bandwidths must be positive"));
        }
        Ok(())
    }
}

/// Default bandwidth grid for cross-validation.
pub const DEFAULT_BANDWIDTH_GRID: [f64; 7] = [0.01, 0.025, 0.05, 0.075, 0.1, 0.15, 0.2];

/// Kernel estimate of `F(r | w)` from radius/direction pairs. Directions are
/// L1-normalised points: simplex angles, or L1-circle points for Laplace
/// margins.
#[derive(Clone, Debug)]
pub struct ThresholdModel {
    params: ThresholdParams,
    dim: usize,
    radii: Vec<f64>,
    directions: Vec<f64>,
}

/// Weights of every observation for one query direction, ready for fast
/// CDF evaluation.
struct Weighted<'a> {
    model: &'a ThresholdModel,
    weights: Vec<f64>,
    prefix: Vec<f64>,
}

impl Weighted<'_> {
    fn cdf(&self, r: f64) -> f64 {
        let m = self.model;
        let h = m.params.h_r;
        let reach = m.params.kernel.reach() * h;
        let lo = m.radii.partition_point(|&x| x < r - reach);
        let hi = m.radii.partition_point(|&x| x <= r + reach);
        let mut s = self.prefix[lo];
        for i in lo..hi {
            s += self.weights[i] * m.params.kernel.cdf((r - m.radii[i]) / h);
        }
        let total = self.prefix[m.radii.len()];
        (s / total).clamp(0.0, 1.0)
    }
}

impl ThresholdModel {
    /// `directions` holds `radii.len()` rows of length `dim`.
    pub fn new(params: ThresholdParams, dim: usize, radii: &[f64], directions: &[f64]) -> Result<Self> {
        params.validate()?;
        if radii.is_empty() {
            return Err(invalid("threshold model needs data"));
        }
        if directions.len() != radii.len() * dim {
            return Err(invalid("direction rows do not match radii"));
        }
        let mut order: Vec<usize> = (0..radii.len()).collect();
        order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
        let sorted_r = order.iter().map(|&i| radii[i]).collect();
        let mut sorted_w = Vec::with_capacity(directions.len());
        for &i in &order {
            sorted_w.extend_from_slice(&directions[i * dim..(i + 1) * dim]);
        }
        Ok(ThresholdModel { params, dim, radii: sorted_r, directions: sorted_w })
    }

    pub fn params(&self) -> ThresholdParams {
        self.params
    }

    pub fn tau(&self) -> f64 {
        self.params.tau
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    fn weighted(&self, w: &[f64]) -> Result<Weighted<'_>> {
        if w.len() != self.dim {
            return Err(invalid("direction has wrong dimension"));
        }
        let n = self.radii.len();
        let mut logs = vec![0.0; n];
        let mut diff = [0.0; crate::simplex::MAX_DIM];
        let mut top = f64::NEG_INFINITY;
        for i in 0..n {
            let wi = &self.directions[i * self.dim..(i + 1) * self.dim];
            for j in 0..self.dim {
                diff[j] = w[j] - wi[j];
            }
            logs[i] = self.params.kernel.angular(&diff[..self.dim], self.params.h_w);
            top = top.max(logs[i]);
        }
        if top == f64::NEG_INFINITY {
            return Err(Error::SparseKernel);
        }
        // weights below e^-60 of the largest cannot move the estimate
        let weights: Vec<f64> = logs.iter().map(|&l| if l - top < -60.0 { 0.0 } else { libm::exp(l - top) }).collect();
        let mut prefix = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &a in &weights {
            acc += a;
            prefix.push(acc);
        }
        Ok(Weighted { model: self, weights, prefix })
    }

    pub fn conditional_cdf(&self, r: f64, w: &[f64]) -> Result<f64> {
        Ok(self.weighted(w)?.cdf(r))
    }

    /// Solves `F(r | w) = tau` for `r`.
    pub fn quantile(&self, w: &[f64]) -> Result<f64> {
        let wt = self.weighted(w)?;
        let tau = self.params.tau;
        // bracket around the weighted sample quantile first
        let total = wt.prefix[self.radii.len()];
        let idx = wt.prefix.partition_point(|&p| p < tau * total).clamp(1, self.radii.len()) - 1;
        let guess = self.radii[idx];
        let width = 10.0 * self.params.h_r;
        let (lo, hi) = ((guess - width).max(0.0), guess + width);
        if wt.cdf(lo) < tau && wt.cdf(hi) >= tau {
            return brent_root(|r| wt.cdf(r) - tau, lo, hi, 1e-12 * hi, 500);
        }
        let lo = 0.0;
        if wt.cdf(lo) >= tau {
            return Err(Error::NoBracket);
        }
        let mut hi = self.radii[self.radii.len() - 1] + width;
        let mut tries = 0;
        while wt.cdf(hi) < tau {
            hi *= 2.0;
            tries += 1;
            if tries > 60 {
                return Err(Error::NoBracket);
            }
        }
        brent_root(|r| wt.cdf(r) - tau, lo, hi, 1e-12 * hi, 500)
    }
}

impl RadialThreshold for ThresholdModel {
    fn threshold(&self, direction: &[f64]) -> Result<f64> {
        self.quantile(direction)
    }
}

/// Check (pinball) loss of predicting `pred` for observation `r`.
pub fn check_loss(r: f64, pred: f64, tau: f64) -> f64 {
    let u = r - pred;
    u * (tau - if u < 0.0 { 1.0 } else { 0.0 })
}

/// Fold assignment: a seeded permutation cut into `k` evaluation sets of
/// `floor(n/k)` points; leftover points only ever fit.
pub fn fold_indices<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(invalid("cross-validation needs at least two folds"));
    }
    let size = n / k;
    if size == 0 {
        return Err(Error::EmptyFold);
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    Ok((0..k).map(|f| perm[f * size..(f + 1) * size].to_vec()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub params: ThresholdParams,
    pub score: f64,
}

/// Cross-validated mean check loss for every parameter set in `grid`.
pub fn check_score<R: Rng + ?Sized>(
    dim: usize,
    radii: &[f64],
    directions: &[f64],
    grid: &[ThresholdParams],
    folds: usize,
    rng: &mut R,
) -> Result<Vec<ScoreRow>> {
    let n = radii.len();
    let split = fold_indices(n, folds, rng)?;
    let mut rows = Vec::with_capacity(grid.len());
    for params in grid {
        let mut total = 0.0;
        for eval in &split {
            let mut held = vec![false; n];
            eval.iter().for_each(|&i| held[i] = true);
            let mut fr = Vec::with_capacity(n - eval.len());
            let mut fw = Vec::with_capacity((n - eval.len()) * dim);
            for i in (0..n).filter(|&i| !held[i]) {
                fr.push(radii[i]);
                fw.extend_from_slice(&directions[i * dim..(i + 1) * dim]);
            }
            let model = ThresholdModel::new(*params, dim, &fr, &fw)?;
            let mut loss = 0.0;
            for &i in eval {
                let pred = model.quantile(&directions[i * dim..(i + 1) * dim])?;
                loss += check_loss(radii[i], pred, params.tau);
            }
            total += loss / eval.len() as f64;
        }
        rows.push(ScoreRow { params: *params, score: total / split.len() as f64 });
    }
    Ok(rows)
}

/// Row with the smallest score.
pub fn best_score(rows: &[ScoreRow]) -> Option<ScoreRow> {
    rows.iter().copied().filter(|r| r.score.is_finite()).min_by(|a, b| a.score.total_cmp(&b.score))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_median() {
        let m = ThresholdModel::new(ThresholdParams::default(), 2, &[3.0], &[0.4, 0.6]).unwrap();
        assert!((m.conditional_cdf(3.0, &[0.4, 0.6]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(m.conditional_cdf(1e6, &[0.4, 0.6]).unwrap(), 1.0);
        assert!(m.conditional_cdf(1e-9, &[0.4, 0.6]).unwrap() < 1e-15);
    }

    #[test]
    fn constant_radii_give_that_quantile() {
        let p = ThresholdParams { tau: 0.5, ..Default::default() };
        let m = ThresholdModel::new(p, 2, &[5.0; 4], &[0.1, 0.9, 0.5, 0.5, 0.3, 0.7, 0.8, 0.2]).unwrap();
        assert!((m.quantile(&[0.45, 0.55]).unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn epanechnikov_integrates_to_one() {
        let k = Kernel::Epanechnikov;
        assert_eq!(k.cdf(-1.0), 0.0);
        assert!((k.cdf(1.0 - 1e-15) - 1.0).abs() < 1e-12);
        assert!((k.cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sparse_epanechnikov_is_reported() {
        let p = ThresholdParams { kernel: Kernel::Epanechnikov, h_w: 0.01, ..Default::default() };
        let m = ThresholdModel::new(p, 2, &[1.0], &[0.9, 0.1]).unwrap();
        assert_eq!(m.quantile(&[0.1, 0.9]), Err(Error::SparseKernel));
    }

    #[test]
    fn check_loss_values() {
        assert!((check_loss(2.0, 1.0, 0.9) - 0.9).abs() < 1e-15);
        assert!((check_loss(1.0, 2.0, 0.9) - 0.1).abs() < 1e-15);
    }
}
