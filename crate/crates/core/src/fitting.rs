//! Penalised likelihood fitting of piecewise-linear gauges.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use alloc::format;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gauge::{box_extents, Gauge, PwlGauge};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::simplex::{Domain, SimplexMesh};
use crate::special::{gamma_ln_pdf, gamma_ln_sf, gamma_quantile};
use crate::threshold::{fold_indices, RadialThreshold, ThresholdParams};

/// Radius/direction pairs above the conditional threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceSample {
    dim: usize,
    radii: Vec<f64>,
    directions: Vec<Vec<f64>>,
    thresholds: Vec<f64>,
    n_total: usize,
}

impl ExceedanceSample {
    pub fn new(dim: usize, radii: Vec<f64>, directions: Vec<Vec<f64>>, thresholds: Vec<f64>, n_total: usize) -> Result<Self> {
        if radii.len() != directions.len() || radii.len() != thresholds.len() {
            return Err(invalid("exceedance fields differ in length"));
        }
        if directions.iter().any(|w| w.len() != dim) {
            return Err(invalid("exceedance direction has wrong dimension"));
        }
        if radii.iter().zip(&thresholds).any(|(r, t)| !(r > t) || !(*t >= 0.0)) {
            return Err(invalid("every radius must strictly exceed its non-negative threshold"));
        }
        if n_total < radii.len() {
            return Err(invalid("originating sample size is smaller than the exceedance count"));
        }
        Ok(ExceedanceSample { dim, radii, directions, thresholds, n_total })
    }

    /// Keeps the observations whose radius strictly exceeds its threshold.
    pub fn select(dim: usize, radii: &[f64], directions: &[Vec<f64>], thresholds: &[f64]) -> Result<Self> {
        if radii.len() != directions.len() || radii.len() != thresholds.len() {
            return Err(invalid("data fields differ in length"));
        }
        let keep: Vec<usize> = (0..radii.len()).filter(|&i| radii[i] > thresholds[i]).collect();
        ExceedanceSample::new(
            dim,
            keep.iter().map(|&i| radii[i]).collect(),
            keep.iter().map(|&i| directions[i].clone()).collect(),
            keep.iter().map(|&i| thresholds[i]).collect(),
            radii.len(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    /// Fraction of the originating sample that exceeded the threshold.
    pub fn exceed_fraction(&self) -> f64 {
        self.len() as f64 / self.n_total as f64
    }

    /// Subsample; the originating size shrinks in proportion.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let n_total = ((self.n_total as f64) * idx.len() as f64 / self.len().max(1) as f64).round() as usize;
        ExceedanceSample {
            dim: self.dim,
            radii: idx.iter().map(|&i| self.radii[i]).collect(),
            directions: idx.iter().map(|&i| self.directions[i].clone()).collect(),
            thresholds: idx.iter().map(|&i| self.thresholds[i]).collect(),
            n_total: n_total.max(idx.len()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Radii given directions.
    Radial,
    /// Directions only; parameters identified up to scale.
    Angular,
    /// Radii and directions with one shared gauge.
    Joint,
}

/// The six fit configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setup {
    SS1,
    SS2,
    SS3,
    SS4,
    SS5,
    SS6,
}

impl Setup {
    pub const ALL: [Setup; 6] = [Setup::SS1, Setup::SS2, Setup::SS3, Setup::SS4, Setup::SS5, Setup::SS6];

    pub fn mode(self) -> FitMode {
        match self {
            Setup::SS5 | Setup::SS6 => FitMode::Joint,
            _ => FitMode::Radial,
        }
    }

    pub fn bounded(self) -> bool {
        matches!(self, Setup::SS2 | Setup::SS4 | Setup::SS6)
    }

    /// Whether a separate angular model is fitted.
    pub fn separate_angular(self) -> bool {
        matches!(self, Setup::SS3 | Setup::SS4)
    }

    /// Whether directions are resampled from the exceedances.
    pub fn empirical_angles(self) -> bool {
        matches!(self, Setup::SS1 | Setup::SS2)
    }

    pub fn label(self) -> &'static str {
        match self {
            Setup::SS1 => "SS1",
            Setup::SS2 => "SS2",
            Setup::SS3 => "SS3",
            Setup::SS4 => "SS4",
            Setup::SS5 => "SS5",
            Setup::SS6 => "SS6",
        }
    }
}

impl core::str::FromStr for Setup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Setup::ALL
            .into_iter()
            .find(|x| x.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown fit configuration {s}")))
    }
}

pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_ANGULAR_LAMBDA: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub mode: FitMode,
    pub bounded: bool,
    pub lambda: f64,
    #[serde(default)]
    pub optimizer: NelderMeadOptions,
}

impl FitConfig {
    /// Configuration with the default penalty for `mode`.
    pub fn new(mode: FitMode, bounded: bool) -> Result<Self> {
        let lambda = if mode == FitMode::Angular { DEFAULT_ANGULAR_LAMBDA } else { DEFAULT_LAMBDA };
        let c = FitConfig { mode, bounded, lambda, optimizer: NelderMeadOptions::default() };
        c.validate()?;
        Ok(c)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == FitMode::Angular && self.bounded {
            return Err(invalid("the angular model cannot be bounded"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid("penalty strength must be a non-negative number"));
        }
        Ok(())
    }

    /// Fit configuration label; radial fits need to know whether an angular
    /// model accompanies them. Angular fits alone carry no label.
    pub fn ss_label(&self, with_angular_model: bool) -> Option<Setup> {
        match (self.mode, self.bounded, with_angular_model) {
            (FitMode::Radial, false, false) => Some(Setup::SS1),
            (FitMode::Radial, true, false) => Some(Setup::SS2),
            (FitMode::Radial, false, true) => Some(Setup::SS3),
            (FitMode::Radial, true, true) => Some(Setup::SS4),
            (FitMode::Joint, false, _) => Some(Setup::SS5),
            (FitMode::Joint, true, _) => Some(Setup::SS6),
            (FitMode::Angular, _, _) => None,
        }
    }
}

fn check_dims(gauge: &PwlGauge, sample: &ExceedanceSample) -> Result<()> {
    if gauge.dim() != sample.dim() {
        return Err(invalid("gauge and exceedances differ in dimension"));
    }
    Ok(())
}

fn radial_term(r: f64, thr: f64, d: usize, g: f64) -> f64 {
    -(gamma_ln_pdf(r, d, g) - gamma_ln_sf(thr, d, g))
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite)
    }
}

/// Negative log-likelihood of radii given directions under the truncated
/// gamma model with shape `d` and rate `g(w)`.
pub fn nll_radial(gauge: &PwlGauge, sample: &ExceedanceSample) -> Result<f64> {
    check_dims(gauge, sample)?;
    let d = gauge.dim();
    let mut s = 0.0;
    for i in 0..sample.len() {
        let g = gauge.eval(&sample.directions[i])?;
        s += radial_term(sample.radii[i], sample.thresholds[i], d, g);
    }
    finite(s)
}

/// Negative log-likelihood of directions under `g(w)^{-d} / (d vol)`.
pub fn nll_angular(gauge: &PwlGauge, sample: &ExceedanceSample) -> Result<f64> {
    check_dims(gauge, sample)?;
    let d = gauge.dim() as f64;
    let lv = libm::log(d * gauge.volume());
    let mut s = 0.0;
    for w in &sample.directions {
        s += d * libm::log(gauge.eval(w)?) + lv;
    }
    finite(s)
}

pub fn nll_joint(gauge: &PwlGauge, sample: &ExceedanceSample) -> Result<f64> {
    Ok(nll_radial(gauge, sample)? + nll_angular(gauge, sample)?)
}

pub fn nll(mode: FitMode, gauge: &PwlGauge, sample: &ExceedanceSample) -> Result<f64> {
    match mode {
        FitMode::Radial => nll_radial(gauge, sample),
        FitMode::Angular => nll_angular(gauge, sample),
        FitMode::Joint => nll_joint(gauge, sample),
    }
}

/// Squared difference of two gradient components; differences at the level
/// of round-off count as zero so that coplanar parameters cost nothing.
fn jump(a: f64, b: f64) -> f64 {
    let d = a - b;
    if libm::fabs(d) <= GRADIENT_TOL * libm::fmax(libm::fabs(a), libm::fabs(b)) {
        0.0
    } else {
        d * d
    }
}

const GRADIENT_TOL: f64 = 1e-12;

/// Mean over nodes of the mean squared gradient jump between neighbouring
/// regions around that node.
pub fn gradient_penalty(gauge: &PwlGauge) -> f64 {
    let mesh = gauge.mesh();
    let n = mesh.n_nodes();
    let mut total = 0.0;
    for l in 0..n {
        let pairs = mesh.neighbor_pairs(l);
        if pairs.is_empty() {
            continue;
        }
        let mut s = 0.0;
        for &(i, j) in pairs {
            let gi = gauge.region_gradient(i);
            let gj = gauge.region_gradient(j);
            s += gi.iter().zip(gj).map(|(&a, &b)| jump(a, b)).sum::<f64>();
        }
        total += s / pairs.len() as f64;
    }
    total / n as f64
}

/// Objective with exceedance regions located once.
struct Objective<'a> {
    mesh: Arc<SimplexMesh>,
    sample: &'a ExceedanceSample,
    regions: Vec<usize>,
    mode: FitMode,
    lambda: f64,
}

impl<'a> Objective<'a> {
    fn new(mesh: Arc<SimplexMesh>, sample: &'a ExceedanceSample, mode: FitMode, lambda: f64) -> Result<Self> {
        if sample.dim() != mesh.dim() {
            return Err(invalid("mesh and exceedances differ in dimension"));
        }
        let regions = sample.directions.iter().map(|w| mesh.locate(w)).collect::<Result<Vec<_>>>()?;
        Ok(Objective { mesh, sample, regions, mode, lambda })
    }

    fn likelihood(&self, g: &PwlGauge, mode: FitMode) -> f64 {
        let d = self.mesh.dim();
        let s = self.sample;
        let mut total = 0.0;
        let angular = matches!(mode, FitMode::Angular | FitMode::Joint);
        let radial = matches!(mode, FitMode::Radial | FitMode::Joint);
        let lv = if angular { libm::log(d as f64 * g.volume()) } else { 0.0 };
        for i in 0..s.len() {
            let rate = g.eval_in_region(self.regions[i], &s.directions[i]);
            if radial {
                total += radial_term(s.radii[i], s.thresholds[i], d, rate);
            }
            if angular {
                total += d as f64 * libm::log(rate) + lv;
            }
        }
        total
    }

    fn value(&self, theta: Vec<f64>) -> f64 {
        let g = match PwlGauge::new(self.mesh.clone(), theta) {
            Ok(g) => g,
            Err(_) => return f64::INFINITY,
        };
        let mut v = self.likelihood(&g, self.mode);
        if self.lambda > 0.0 {
            v += self.lambda * gradient_penalty(&g);
        }
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }

    /// Minimises over `log theta[free]` with the other entries held fixed.
    fn minimise(&self, theta: &[f64], free: &[usize], opts: &NelderMeadOptions) -> (Vec<f64>, f64, usize, bool) {
        let x0: Vec<f64> = free.iter().map(|&i| libm::log(theta[i])).collect();
        let mut buf = theta.to_vec();
        let m = nelder_mead(
            |x| {
                for (k, &i) in free.iter().enumerate() {
                    buf[i] = libm::exp(x[k]);
                }
                self.value(buf.clone())
            },
            &x0,
            opts,
        );
        let mut out = theta.to_vec();
        for (k, &i) in free.iter().enumerate() {
            out[i] = libm::exp(m.x[k]);
        }
        (out, m.value, m.evals, m.converged)
    }
}

/// Record of the bounding iterations.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundingReport {
    pub iterations: usize,
    /// Size of the frozen node set after each iteration.
    pub frozen_sizes: Vec<usize>,
    pub frozen: Vec<usize>,
}

/// One fitted gauge.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaugeFit {
    pub gauge: PwlGauge,
    pub objective: f64,
    pub initial_objective: f64,
    pub evals: usize,
    pub converged: bool,
    #[serde(default)]
    pub bounding: Option<BoundingReport>,
}

const BOX_TOL: f64 = 1e-6;

fn inf_norm(w: &[f64]) -> f64 {
    w.iter().map(|v| libm::fabs(*v)).fold(0.0, f64::max)
}

/// Deviation of the box extents from one per coordinate (and sign).
fn box_violations(mesh: &SimplexMesh, theta: &[f64]) -> Vec<(usize, f64)> {
    let signs = if mesh.domain() == Domain::LaplaceCircle { 2 } else { 1 };
    box_extents(mesh, theta)
        .into_iter()
        .enumerate()
        .filter(|(_, m)| libm::fabs(m - 1.0) > BOX_TOL)
        .map(|(idx, _)| (idx / signs, if idx % signs == 0 { 1.0 } else { -1.0 }))
        .collect()
}

fn bound_theta(obj: &Objective, theta: Vec<f64>, opts: &NelderMeadOptions) -> Result<(Vec<f64>, f64, usize, BoundingReport)> {
    let mesh = obj.mesh.clone();
    let n = mesh.n_nodes();
    let mut theta = theta;
    let mut frozen = vec![false; n];
    let mut report = BoundingReport::default();
    let mut evals = 0;
    loop {
        let bad = box_violations(&mesh, &theta);
        if bad.is_empty() {
            break;
        }
        let mut newly = Vec::new();
        for (j, sign) in bad {
            let vals: Vec<f64> = (0..n).map(|i| if frozen[i] { f64::NEG_INFINITY } else { sign * mesh.node(i)[j] * theta[i] }).collect();
            let top = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !(top > 0.0) {
                continue;
            }
            for i in 0..n {
                if vals[i] >= top * (1.0 - 1e-12) && !newly.contains(&i) {
                    newly.push(i);
                }
            }
        }
        if newly.is_empty() {
            return Err(Error::BoundingFailed);
        }
        for &i in &newly {
            theta[i] = 1.0 / inf_norm(mesh.node(i));
            frozen[i] = true;
        }
        report.iterations += 1;
        report.frozen_sizes.push(frozen.iter().filter(|&&f| f).count());
        let free: Vec<usize> = (0..n).filter(|&i| !frozen[i]).collect();
        if free.is_empty() {
            if box_violations(&mesh, &theta).is_empty() {
                break;
            }
            return Err(Error::BoundingFailed);
        }
        let (t, _, e, _) = obj.minimise(&theta, &free, opts);
        theta = t;
        evals += e;
    }
    // remove excess below the box tolerance so that no node leaves the box
    for i in 0..n {
        theta[i] = theta[i].min(1.0 / inf_norm(mesh.node(i)));
    }
    report.frozen = (0..n).filter(|&i| frozen[i]).collect();
    let value = obj.value(theta.clone());
    Ok((theta, value, evals, report))
}

/// Fits a gauge on `mesh` by minimising the penalised negative
/// log-likelihood from `init`.
pub fn fit_gauge(config: &FitConfig, sample: &ExceedanceSample, mesh: Arc<SimplexMesh>, init: &[f64]) -> Result<GaugeFit> {
    config.validate()?;
    if sample.is_empty() {
        return Err(invalid("no exceedances to fit"));
    }
    if init.len() != mesh.n_nodes() || init.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(invalid("initial theta must hold one positive value per node"));
    }
    let obj = Objective::new(mesh.clone(), sample, config.mode, config.lambda)?;
    let mut theta = init.to_vec();
    let free: Vec<usize> = if config.mode == FitMode::Angular {
        let t0 = theta[0];
        theta.iter_mut().for_each(|t| *t /= t0);
        (1..theta.len()).collect()
    } else {
        (0..theta.len()).collect()
    };
    let initial_objective = obj.value(theta.clone());
    let (mut theta, mut objective, mut evals, converged) = obj.minimise(&theta, &free, &config.optimizer);
    if !converged {
        log::warn!("optimizer stopped at its evaluation budget");
    }
    if !objective.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut bounding = None;
    if config.bounded {
        let (t, v, e, report) = bound_theta(&obj, theta, &config.optimizer)?;
        theta = t;
        objective = v;
        evals += e;
        bounding = Some(report);
    }
    Ok(GaugeFit { gauge: PwlGauge::new(mesh, theta)?, objective, initial_objective, evals, converged, bounding })
}

/// Starting values `theta_k = r(w*k) / c` with `c` the `tau` quantile of
/// Gamma(d, 1), capped at `1/||w*k||_inf`.
pub fn initial_theta<T: RadialThreshold>(mesh: &SimplexMesh, threshold: &T, tau: f64) -> Result<Vec<f64>> {
    let c = gamma_quantile(tau, mesh.dim(), 1.0)?;
    mesh.nodes()
        .iter()
        .map(|w| {
            let r = threshold.threshold(w)?;
            Ok((r / c).min(1.0 / inf_norm(w)).max(1e-6))
        })
        .collect()
}

/// Fitted gauges for one fit configuration together with the data they
/// were fitted to.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FittedModel {
    pub setup: Option<Setup>,
    pub config: FitConfig,
    pub radial: Option<GaugeFit>,
    pub angular: Option<GaugeFit>,
    #[serde(default)]
    pub threshold: Option<ThresholdParams>,
    pub exceedances: ExceedanceSample,
}

impl FittedModel {
    pub fn radial_gauge(&self) -> Option<&PwlGauge> {
        self.radial.as_ref().map(|f| &f.gauge)
    }

    pub fn angular_gauge(&self) -> Option<&PwlGauge> {
        self.angular.as_ref().map(|f| &f.gauge)
    }

    /// Total objective of the fitted gauges.
    pub fn objective(&self) -> f64 {
        match (&self.radial, &self.angular, self.config.mode) {
            (Some(r), _, FitMode::Joint) => r.objective,
            (r, a, _) => r.as_ref().map_or(0.0, |f| f.objective) + a.as_ref().map_or(0.0, |f| f.objective),
        }
    }
}

/// Penalties for the radial (or joint) and the angular fits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetupOptions {
    pub lambda: f64,
    pub angular_lambda: f64,
    #[serde(default)]
    pub optimizer: NelderMeadOptions,
}

impl Default for SetupOptions {
    fn default() -> Self {
        SetupOptions { lambda: DEFAULT_LAMBDA, angular_lambda: DEFAULT_ANGULAR_LAMBDA, optimizer: NelderMeadOptions::default() }
    }
}

/// Fits one of the six configurations.
pub fn fit_setup(
    setup: Setup,
    sample: &ExceedanceSample,
    mesh: Arc<SimplexMesh>,
    init: &[f64],
    options: &SetupOptions,
) -> Result<FittedModel> {
    let config = FitConfig { mode: setup.mode(), bounded: setup.bounded(), lambda: options.lambda, optimizer: options.optimizer };
    let main = fit_gauge(&config, sample, mesh.clone(), init)?;
    let angular = if setup.separate_angular() {
        let ac = FitConfig { mode: FitMode::Angular, bounded: false, lambda: options.angular_lambda, optimizer: options.optimizer };
        Some(fit_gauge(&ac, sample, mesh, init)?)
    } else if setup.mode() == FitMode::Joint {
        Some(main.clone())
    } else {
        None
    };
    Ok(FittedModel { setup: Some(setup), config, radial: Some(main), angular, threshold: None, exceedances: sample.clone() })
}

/// Fits a single gauge and wraps it as a model.
pub fn fit(config: &FitConfig, sample: &ExceedanceSample, mesh: Arc<SimplexMesh>, init: &[f64]) -> Result<FittedModel> {
    let g = fit_gauge(config, sample, mesh, init)?;
    let (radial, angular) = match config.mode {
        FitMode::Radial => (Some(g), None),
        FitMode::Angular => (None, Some(g)),
        FitMode::Joint => (Some(g.clone()), Some(g)),
    };
    Ok(FittedModel { setup: config.ss_label(false), config: *config, radial, angular, threshold: None, exceedances: sample.clone() })
}

/// Applies the bounding iterations to the radial (or joint) gauge of a
/// fitted model, re-optimising the unfrozen parameters.
pub fn bound(model: &FittedModel) -> Result<FittedModel> {
    if model.config.mode == FitMode::Angular {
        return Err(invalid("the angular model cannot be bounded"));
    }
    let fit = model.radial.as_ref().ok_or_else(|| invalid("model has no radial gauge"))?;
    let mesh = fit.gauge.mesh_arc().clone();
    let obj = Objective::new(mesh.clone(), &model.exceedances, model.config.mode, model.config.lambda)?;
    let (theta, value, evals, report) = bound_theta(&obj, fit.gauge.theta().to_vec(), &model.config.optimizer)?;
    let mut out = model.clone();
    let bounded = GaugeFit {
        gauge: PwlGauge::new(mesh, theta)?,
        objective: value,
        initial_objective: fit.initial_objective,
        evals: fit.evals + evals,
        converged: fit.converged,
        bounding: Some(report),
    };
    if model.config.mode == FitMode::Joint {
        out.angular = Some(bounded.clone());
    }
    out.radial = Some(bounded);
    out.config.bounded = true;
    if let Some(s) = out.setup {
        out.setup = Some(match s {
            Setup::SS1 => Setup::SS2,
            Setup::SS3 => Setup::SS4,
            Setup::SS5 => Setup::SS6,
            other => other,
        });
    }
    Ok(out)
}

/// Largest box coordinate over nodes minus one, per coordinate.
pub fn box_gap(gauge: &PwlGauge) -> f64 {
    gauge.box_extents().iter().map(|m| libm::fabs(m - 1.0)).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    pub score: f64,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub rows: Vec<CvRow>,
}

pub const DEFAULT_LAMBDA_GRID: [f64; 7] = [0.0, 0.1, 0.5, 1.0, 5.0, 20.0, 100.0];

/// K-fold cross-validated held-out negative log-likelihood over a penalty
/// grid.
pub fn select_lambda<R: Rng + ?Sized>(
    config: &FitConfig,
    sample: &ExceedanceSample,
    mesh: Arc<SimplexMesh>,
    init: &[f64],
    folds: usize,
    grid: &[f64],
    rng: &mut R,
) -> Result<LambdaSelection> {
    if grid.is_empty() {
        return Err(invalid("penalty grid is empty"));
    }
    let split = fold_indices(sample.len(), folds, rng)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let cfg = config.with_lambda(lambda)?;
        let mut total = 0.0;
        let mut valid = true;
        for eval in &split {
            let mut held = vec![false; sample.len()];
            eval.iter().for_each(|&i| held[i] = true);
            let fit_idx: Vec<usize> = (0..sample.len()).filter(|&i| !held[i]).collect();
            let cell = fit_gauge(&cfg, &sample.subset(&fit_idx), mesh.clone(), init)
                .and_then(|g| nll(cfg.mode, &g.gauge, &sample.subset(eval)));
            match cell {
                Ok(v) => total += v,
                Err(e) => {
                    log::warn!("cross-validation fit failed for lambda {lambda}: {e}");
                    valid = false;
                }
            }
        }
        rows.push(CvRow { lambda, score: if valid { total / split.len() as f64 } else { f64::NAN }, valid });
    }
    let best = rows
        .iter()
        .filter(|r| r.valid)
        .min_by(|a, b| a.score.total_cmp(&b.score))
        .ok_or_else(|| invalid("every penalty value failed cross-validation"))?;
    Ok(LambdaSelection { lambda: best.lambda, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_gauge() -> PwlGauge {
        let mesh = SimplexMesh::regular(2, 5).unwrap();
        PwlGauge::new(Arc::new(mesh), vec![1.0; 5]).unwrap()
    }

    #[test]
    fn untruncated_single_point() {
        let s = ExceedanceSample::new(2, vec![3.0], vec![vec![0.5, 0.5]], vec![0.0], 1).unwrap();
        let v = nll_radial(&flat_gauge(), &s).unwrap();
        assert!((v + (3.0f64 * (-3.0f64).exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn flat_gauge_is_uniform() {
        let s = ExceedanceSample::new(2, vec![3.0, 4.0], vec![vec![0.2, 0.8], vec![0.9, 0.1]], vec![1.0, 1.0], 10).unwrap();
        assert!(nll_angular(&flat_gauge(), &s).unwrap().abs() < 1e-12);
        assert_eq!(gradient_penalty(&flat_gauge()), 0.0);
    }

    #[test]
    fn labels_follow_configuration() {
        let c = FitConfig::new(FitMode::Radial, true).unwrap();
        assert_eq!(c.ss_label(true), Some(Setup::SS4));
        assert_eq!(c.ss_label(false), Some(Setup::SS2));
        assert!(FitConfig::new(FitMode::Angular, true).is_err());
        assert_eq!("ss5".parse::<Setup>().unwrap(), Setup::SS5);
    }

    #[test]
    fn exceedances_must_exceed() {
        assert!(ExceedanceSample::new(2, vec![1.0], vec![vec![0.5, 0.5]], vec![1.0], 1).is_err());
        let s = ExceedanceSample::select(2, &[1.0, 2.0, 3.0], &vec![vec![0.5, 0.5]; 3], &[1.5, 1.5, 1.5]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.n_total(), 3);
    }
}
