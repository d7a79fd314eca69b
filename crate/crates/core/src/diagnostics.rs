//! Model checking: probability-integral transforms, return curves,
//! extremal coefficients and limit-set export.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Margin;
use crate::error::{invalid, Error, Result};
use crate::fitting::{ExceedanceSample, FittedModel};
use crate::gauge::{project_gauge, Gauge, PwlGauge};
use crate::sampling::{sample_model_exceedances, AngularSampler};
use crate::simplex::{Domain, LaplaceAngle};
use crate::special::{gamma_ln_sf, gamma_quantile};
use crate::threshold::RadialThreshold;

/// Points with coordinates `k / m` summing to one.
pub fn simplex_lattice(dim: usize, m: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == dim {
            cur.push(left);
            out.push(cur.iter().map(|&k| k as f64 / m as f64).collect());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(dim, left - k, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if dim >= 1 && m >= 1 {
        rec(dim, m, m, &mut Vec::with_capacity(dim), &mut out);
    }
    out
}

/// Roughly `count` evenly spread directions: an evenly spaced segment or
/// circle in two dimensions, the coarsest lattice with at least `count`
/// points otherwise.
pub fn angle_grid(domain: Domain, dim: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    if count < 2 || dim < 2 {
        return Err(invalid("angle grid needs at least two points and two dimensions"));
    }
    match domain {
        Domain::LaplaceCircle => (0..count)
            .map(|i| Ok(LaplaceAngle::new(-2.0 + 4.0 * i as f64 / count as f64)?.direction().to_vec()))
            .collect(),
        Domain::Simplex if dim == 2 => Ok((0..count)
            .map(|i| {
                let t = i as f64 / (count - 1) as f64;
                vec![t, 1.0 - t]
            })
            .collect()),
        Domain::Simplex => {
            let mut m = 1;
            while binomial(m + dim - 1, dim - 1) < count {
                m += 1;
            }
            Ok(simplex_lattice(dim, m))
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Default number of angles for return curves.
pub fn default_curve_points(dim: usize) -> usize {
    if dim == 2 {
        500
    } else {
        2000
    }
}

/// Truncated-gamma probability integral transform of each exceedance.
pub fn pit_values(gauge: &PwlGauge, sample: &ExceedanceSample) -> Result<Vec<f64>> {
    let d = gauge.dim();
    let mut out = Vec::with_capacity(sample.len());
    for i in 0..sample.len() {
        let g = gauge.eval(&sample.directions()[i])?;
        let ln_s = gamma_ln_sf(sample.radii()[i], d, g);
        let ln_s0 = gamma_ln_sf(sample.thresholds()[i], d, g);
        if !ln_s0.is_finite() {
            return Err(Error::NonFinite);
        }
        out.push(-libm::expm1(ln_s - ln_s0));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpQqRow {
    pub empirical_p: f64,
    pub model_p: f64,
    pub empirical_q: f64,
    pub model_q: f64,
}

/// Probability-probability and quantile-quantile pairs; quantiles are on
/// the standard exponential scale.
pub fn pp_qq_data(gauge: &PwlGauge, sample: &ExceedanceSample) -> Result<Vec<PpQqRow>> {
    let mut u = pit_values(gauge, sample)?;
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    Ok(u.iter()
        .enumerate()
        .map(|(i, &ui)| {
            let p = (i + 1) as f64 / (n + 1.0);
            PpQqRow { empirical_p: ui, model_p: p, empirical_q: -libm::log1p(-ui), model_q: -libm::log1p(-p) }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub direction: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnCurve {
    pub period: f64,
    pub points: Vec<CurvePoint>,
}

fn check_period(period: f64, tau: f64) -> Result<f64> {
    let minimum = 1.0 / (1.0 - tau);
    if !(period >= minimum * (1.0 - 1e-12)) {
        return Err(Error::ReturnPeriodTooShort { period, minimum });
    }
    Ok(1.0 - 1.0 / period)
}

/// Radius of the return curve for `period` in one direction.
pub fn return_radius<G: Gauge>(gauge: &G, tau: f64, period: f64, direction: &[f64]) -> Result<f64> {
    let p = check_period(period, tau)?;
    gamma_quantile(p, gauge.dim(), gauge.eval(direction)?)
}

pub fn return_curve<G: Gauge>(gauge: &G, tau: f64, period: f64, directions: &[Vec<f64>]) -> Result<ReturnCurve> {
    let points = directions
        .iter()
        .map(|w| Ok(CurvePoint { direction: w.clone(), radius: return_radius(gauge, tau, period, w)? }))
        .collect::<Result<_>>()?;
    Ok(ReturnCurve { period, points })
}

/// Fraction of observations lying beyond the return curve for `period`.
pub fn fraction_beyond<G: Gauge>(gauge: &G, tau: f64, period: f64, radii: &[f64], directions: &[Vec<f64>]) -> Result<f64> {
    if radii.is_empty() || radii.len() != directions.len() {
        return Err(invalid("radii and directions must be non-empty and aligned"));
    }
    let mut count = 0usize;
    for (r, w) in radii.iter().zip(directions) {
        if *r > return_radius(gauge, tau, period, w)? {
            count += 1;
        }
    }
    Ok(count as f64 / radii.len() as f64)
}

/// Extremal coefficients over a grid of levels for one coordinate subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiEstimate {
    pub subset: Vec<usize>,
    pub u: Vec<f64>,
    pub empirical: Option<Vec<f64>>,
    pub model: Vec<f64>,
    pub se: Vec<f64>,
    pub u0: f64,
}

fn check_subset(subset: &[usize], dim: usize) -> Result<()> {
    if subset.is_empty() || subset.iter().any(|&j| j >= dim) {
        return Err(invalid("coordinate subset must be non-empty and within range"));
    }
    Ok(())
}

fn all_above(x: &[f64], subset: &[usize], level: f64) -> bool {
    subset.iter().all(|&j| x[j] > level)
}

/// `(1 - u)^{-1}` times the fraction of rows exceeding the `u` quantile of
/// the margin in every coordinate of `subset`.
pub fn chi_empirical(rows: &[Vec<f64>], subset: &[usize], u: &[f64], margin: Margin) -> Result<Vec<f64>> {
    let dim = rows.first().map_or(0, |r| r.len());
    check_subset(subset, dim)?;
    let n = rows.len() as f64;
    u.iter()
        .map(|&ui| {
            if !(ui > 0.0 && ui < 1.0) {
                return Err(invalid("levels must lie in (0, 1)"));
            }
            let level = margin.quantile(crate::data::Tail::from_cdf(ui));
            let hits = rows.iter().filter(|x| all_above(x, subset, level)).count();
            Ok(hits as f64 / n / (1.0 - ui))
        })
        .collect()
}

/// Percentile band of the empirical coefficient from an i.i.d. bootstrap.
pub fn chi_bootstrap<R: Rng + ?Sized>(
    rows: &[Vec<f64>],
    subset: &[usize],
    u: f64,
    margin: Margin,
    replicates: usize,
    coverage: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let dim = rows.first().map_or(0, |r| r.len());
    check_subset(subset, dim)?;
    if replicates < 2 || !(coverage > 0.0 && coverage < 1.0) {
        return Err(invalid("bootstrap needs two replicates and coverage in (0, 1)"));
    }
    let level = margin.quantile(crate::data::Tail::from_cdf(u));
    let flags: Vec<bool> = rows.iter().map(|x| all_above(x, subset, level)).collect();
    let n = flags.len();
    let mut stats: Vec<f64> = (0..replicates)
        .map(|_| {
            let hits = (0..n).filter(|_| flags[rng.random_range(0..n)]).count();
            hits as f64 / n as f64 / (1.0 - u)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let lo = ((1.0 - coverage) / 2.0 * (replicates - 1) as f64).round() as usize;
    let hi = ((1.0 + coverage) / 2.0 * (replicates - 1) as f64).round() as usize;
    Ok((stats[lo], stats[hi]))
}

fn u0_mesh(domain: Domain, dim: usize) -> Result<Vec<Vec<f64>>> {
    // odd count so that the two-dimensional mesh contains the midpoint
    angle_grid(domain, dim, if dim >= 4 { 10_000 } else { 1001 })
}

/// Smallest level at which the joint exceedance region of `subset` lies
/// beyond the threshold surface, maximised over a mesh of directions.
pub fn chi_u0<T: RadialThreshold>(threshold: &T, domain: Domain, dim: usize, subset: &[usize], margin: Margin) -> Result<f64> {
    check_subset(subset, dim)?;
    let mut worst = f64::NEG_INFINITY;
    for w in u0_mesh(domain, dim)? {
        let r = threshold.threshold(&w)?;
        let m = subset.iter().map(|&j| r * w[j]).fold(f64::INFINITY, f64::min);
        worst = worst.max(m);
    }
    Ok(margin.cdf(worst))
}

/// Model-based coefficients from one simulated exceedance cloud reused for
/// every level.
#[allow(clippy::too_many_arguments)]
pub fn chi_model<T: RadialThreshold, R: Rng + ?Sized>(
    model: &FittedModel,
    threshold: &T,
    sampler: &AngularSampler,
    subset: &[usize],
    u: &[f64],
    n_star: usize,
    margin: Margin,
    rng: &mut R,
) -> Result<ChiEstimate> {
    let gauge = model.radial_gauge().ok_or_else(|| invalid("model has no radial gauge"))?;
    let dim = gauge.dim();
    let u0 = chi_u0(threshold, gauge.mesh().domain(), dim, subset, margin)?;
    if let Some(&low) = u.iter().find(|&&ui| ui < u0) {
        return Err(Error::LevelTooLow { u: low, minimum: u0 });
    }
    if u.iter().any(|&ui| !(ui < 1.0)) {
        return Err(invalid("levels must be below one"));
    }
    let sim = sample_model_exceedances(model, threshold, sampler, n_star, rng)?;
    let frac = model.exceedances.exceed_fraction();
    let mut values = Vec::with_capacity(u.len());
    let mut ses = Vec::with_capacity(u.len());
    for &ui in u {
        let level = margin.quantile(crate::data::Tail::from_cdf(ui));
        let hits = sim.points.iter().filter(|x| all_above(x, subset, level)).count();
        let p = hits as f64 / n_star as f64;
        values.push(frac * p / (1.0 - ui));
        ses.push(frac * libm::sqrt(p * (1.0 - p) / n_star as f64) / (1.0 - ui));
    }
    Ok(ChiEstimate { subset: subset.to_vec(), u: u.to_vec(), empirical: None, model: values, se: ses, u0 })
}

/// Sampled boundary of the fitted limit set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSetSurface {
    /// Coordinates the rows refer to, zero-based.
    pub coordinates: Vec<usize>,
    /// Dropped coordinates minimised over, zero-based.
    pub dropped: Vec<usize>,
    pub rows: Vec<CurvePoint>,
}

/// Boundary points `w / g(w)` for up to three dimensions; for four, one
/// three-dimensional projection per dropped coordinate, minimising over a
/// mesh of `projection_mesh` values.
pub fn export_limit_set<G: Gauge>(gauge: &G, domain: Domain, resolution: usize, projection_mesh: usize) -> Result<Vec<LimitSetSurface>> {
    let d = gauge.dim();
    if d <= 3 {
        let rows = angle_grid(domain, d, resolution)?
            .into_iter()
            .map(|w| Ok(CurvePoint { radius: 1.0 / gauge.eval(&w)?, direction: w }))
            .collect::<Result<_>>()?;
        return Ok(vec![LimitSetSurface { coordinates: (0..d).collect(), dropped: Vec::new(), rows }]);
    }
    if d != 4 {
        return Err(Error::UnsupportedDimension(d));
    }
    let grid = angle_grid(Domain::Simplex, 3, resolution)?;
    (0..d)
        .map(|j| {
            let proj = project_gauge(gauge, &[j], projection_mesh)?;
            let rows = grid
                .iter()
                .map(|w| Ok(CurvePoint { radius: 1.0 / proj.eval(w)?, direction: w.clone() }))
                .collect::<Result<_>>()?;
            Ok(LimitSetSurface { coordinates: proj.kept().to_vec(), dropped: vec![j], rows })
        })
        .collect()
}
