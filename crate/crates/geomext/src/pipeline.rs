//! In-memory pipeline steps and the file-level commands built on them.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use geomext_core::data::{self, Margin};
use geomext_core::diagnostics::{self, ChiEstimate, PpQqRow};
use geomext_core::fitting::{self, LambdaSelection, SetupOptions};
use geomext_core::sampling::{self, AngularSampler, ProbabilityEstimate, SimulatedExceedances};
use geomext_core::threshold::{self, ScoreRow};
use geomext_core::{ExceedanceSample, FittedModel, Gauge, RadialThreshold, Setup, SimplexMesh, ThresholdModel, ThresholdParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{MeshSpec, RegionSpec, RunConfig};
use crate::io::{self, Table};
use crate::manifest::write_manifest;

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Radii and flattened directions of a data set.
#[derive(Clone, Debug)]
pub struct PolarData {
    pub dim: usize,
    pub radii: Vec<f64>,
    pub flat: Vec<f64>,
}

impl PolarData {
    pub fn new(rows: &[Vec<f64>], margin: Margin) -> Result<PolarData> {
        let dim = rows.first().map_or(0, Vec::len);
        if dim < 2 {
            bail!("data need at least two columns");
        }
        if margin == Margin::Laplace && dim != 2 {
            bail!("Laplace margins need exactly two columns");
        }
        let (radii, flat) = data::polar_all(rows, margin)?;
        Ok(PolarData { dim, radii, flat })
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        &self.flat[i * self.dim..(i + 1) * self.dim]
    }

    pub fn threshold_model(&self, params: ThresholdParams) -> Result<ThresholdModel> {
        Ok(ThresholdModel::new(params, self.dim, &self.radii, &self.flat)?)
    }

    /// Points whose radius exceeds the threshold in their own direction.
    pub fn exceedances<T: RadialThreshold>(&self, threshold: &T) -> Result<ExceedanceSample> {
        let dirs: Vec<Vec<f64>> = (0..self.radii.len()).map(|i| self.direction(i).to_vec()).collect();
        let thr = dirs.iter().map(|w| threshold.threshold(w)).collect::<geomext_core::Result<Vec<_>>>()?;
        Ok(ExceedanceSample::select(self.dim, &self.radii, &dirs, &thr)?)
    }
}

/// Threshold, exceedances, mesh and starting values for one data set.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub polar: PolarData,
    pub threshold: ThresholdModel,
    pub sample: ExceedanceSample,
    pub mesh: Arc<SimplexMesh>,
    pub init: Vec<f64>,
}

pub fn prepare(rows: &[Vec<f64>], cfg: &RunConfig, params: ThresholdParams) -> Result<Prepared> {
    let polar = PolarData::new(rows, cfg.margin)?;
    let threshold = polar.threshold_model(params)?;
    let sample = polar.exceedances(&threshold)?;
    if sample.len() < 2 * polar.dim {
        bail!("only {} exceedances; lower the threshold level", sample.len());
    }
    let spec = cfg.mesh.clone().unwrap_or_else(|| MeshSpec::default_for(polar.dim, cfg.margin));
    let mesh = Arc::new(spec.build(polar.dim)?);
    let init = fitting::initial_theta(&mesh, &threshold, params.tau)?;
    Ok(Prepared { polar, threshold, sample, mesh, init })
}

/// Gauge fit for a prepared data set: the named configuration when
/// `setup` is given, the configured mode otherwise. A penalty grid in the
/// configuration is cross-validated first.
pub fn fit_prepared(
    prep: &Prepared,
    cfg: &RunConfig,
    setup: Option<Setup>,
    rng: &mut ChaCha8Rng,
) -> Result<(FittedModel, Option<LambdaSelection>)> {
    let base = match setup {
        Some(s) => geomext_core::FitConfig { mode: s.mode(), bounded: s.bounded(), lambda: cfg.lambda, optimizer: cfg.optimizer },
        None => cfg.fit_config()?,
    };
    let lambda = match &cfg.lambda_grid {
        Some(grid) => Some(fitting::select_lambda(&base, &prep.sample, prep.mesh.clone(), &prep.init, cfg.folds, grid, rng)?),
        None => None,
    };
    let chosen = lambda.as_ref().map_or(cfg.lambda, |s| s.lambda);
    let mut model = match setup {
        Some(s) => {
            let opts = SetupOptions { lambda: chosen, angular_lambda: cfg.angular_lambda, optimizer: cfg.optimizer };
            fitting::fit_setup(s, &prep.sample, prep.mesh.clone(), &prep.init, &opts)?
        }
        None => fitting::fit(&base.with_lambda(chosen)?, &prep.sample, prep.mesh.clone(), &prep.init)?,
    };
    model.threshold = Some(prep.threshold.params());
    Ok((model, lambda))
}

/// Result of fitting a data set.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub model: FittedModel,
    pub threshold: ThresholdModel,
    pub lambda: Option<LambdaSelection>,
}

pub fn fit_data(rows: &[Vec<f64>], cfg: &RunConfig, params: ThresholdParams, rng: &mut ChaCha8Rng) -> Result<FitOutcome> {
    let prep = prepare(rows, cfg, params)?;
    let (model, lambda) = fit_prepared(&prep, cfg, cfg.setup, rng)?;
    Ok(FitOutcome { model, threshold: prep.threshold, lambda })
}

/// Angular sampler for a model, with the configured burn-in.
pub fn sampler_for(model: &FittedModel, burn_in: usize) -> Result<AngularSampler> {
    let mut s = AngularSampler::for_model(model)?;
    if let AngularSampler::Mcmc(m) = &mut s {
        m.burn_in = burn_in;
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionEstimate {
    pub region: String,
    pub estimate: f64,
    pub se: f64,
    pub hits: usize,
    pub n_star: usize,
    pub tau: f64,
}

/// Probabilities of every region from one simulated cloud.
pub fn extrapolate<T: RadialThreshold>(
    model: &FittedModel,
    threshold: &T,
    regions: &[RegionSpec],
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<RegionEstimate>, SimulatedExceedances)> {
    let tau = model.threshold.map_or(cfg.threshold.tau, |p| p.tau);
    let boxes = regions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let b = r.region()?;
            b.validate(threshold, cfg.margin).with_context(|| format!("region {}", r.label(i)))?;
            Ok(b)
        })
        .collect::<Result<Vec<_>>>()?;
    let sampler = sampler_for(model, cfg.burn_in)?;
    let cloud = sampling::sample_model_exceedances(model, threshold, &sampler, cfg.n_star, rng)?;
    let frac = model.exceedances.exceed_fraction();
    let rows = regions
        .iter()
        .zip(&boxes)
        .enumerate()
        .map(|(i, (spec, b))| {
            let ProbabilityEstimate { estimate, se, hits, n_star, .. } = sampling::probability_from_points(&cloud.points, b, frac);
            RegionEstimate { region: spec.label(i), estimate, se, hits, n_star, tau }
        })
        .collect();
    Ok((rows, cloud))
}

/// All coordinate pairs.
pub fn default_subsets(dim: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for i in 0..dim {
        for j in i + 1..dim {
            out.push(vec![i, j]);
        }
    }
    out
}

/// Model and empirical extremal dependence coefficients for one subset at
/// the levels not below the subset's minimum level.
pub fn chi_for_subset<T: RadialThreshold>(
    model: &FittedModel,
    threshold: &T,
    rows: &[Vec<f64>],
    subset: &[usize],
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ChiEstimate> {
    let gauge = model.radial_gauge().context("model has no radial gauge")?;
    let u0 = diagnostics::chi_u0(threshold, gauge.mesh().domain(), gauge.dim(), subset, cfg.margin)?;
    let levels: Vec<f64> = cfg.chi_levels.iter().copied().filter(|&u| u >= u0).collect();
    let skipped = cfg.chi_levels.len() - levels.len();
    if skipped > 0 {
        log::warn!("subset {subset:?}: {skipped} levels lie below the minimum level {u0:.4} and are skipped");
    }
    if levels.is_empty() {
        return Ok(ChiEstimate { subset: subset.to_vec(), u: Vec::new(), empirical: Some(Vec::new()), model: Vec::new(), se: Vec::new(), u0 });
    }
    let sampler = sampler_for(model, cfg.burn_in)?;
    let mut est = diagnostics::chi_model(model, threshold, &sampler, subset, &levels, cfg.n_star, cfg.margin, rng)?;
    est.empirical = Some(diagnostics::chi_empirical(rows, subset, &levels, cfg.margin)?);
    Ok(est)
}

// ---- file-level commands ----

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn input_table(cfg: &RunConfig) -> Result<Table> {
    let path = cfg.input.as_ref().context("no input file: set `input` or pass --input")?;
    io::read_table(path)
}

fn threshold_params(cfg: &RunConfig) -> Result<ThresholdParams> {
    match &cfg.threshold_file {
        Some(p) => {
            let params: ThresholdParams = io::read_json(p)?;
            params.validate()?;
            Ok(params)
        }
        None => Ok(cfg.threshold),
    }
}

fn finish(dir: &Path, command: &str, cfg: &RunConfig, outputs: Vec<PathBuf>) -> Result<Vec<PathBuf>> {
    let mut all = outputs;
    all.push(write_manifest(dir, command, cfg, &all)?);
    Ok(all)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let spec = cfg.copula_spec()?;
    let rows = data::simulate(&spec, cfg.margin, cfg.n, &mut rng_for(cfg.seed))?;
    let dir = out_dir(cfg)?;
    let path = dir.join("data.csv");
    io::write_table(&path, &data::default_names(spec.dim()), &rows)?;
    finish(&dir, "simulate", cfg, vec![path])
}

pub fn cmd_transform(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let table = input_table(cfg)?;
    let (rows, transforms) = data::transform_margins(&table.rows, cfg.tail_quantile, cfg.margin)?;
    let dir = out_dir(cfg)?;
    let data_path = dir.join("data.csv");
    let meta_path = dir.join("transform.json");
    io::write_table(&data_path, &table.names, &rows)?;
    io::write_json(&meta_path, &transforms)?;
    finish(&dir, "transform", cfg, vec![data_path, meta_path])
}

#[derive(Serialize)]
struct ScoreRecord {
    h_w: f64,
    h_r: f64,
    score: f64,
}

#[derive(Serialize)]
struct ThresholdRecord {
    radius: f64,
    threshold: f64,
    exceeds: bool,
}

pub fn cmd_threshold(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let table = input_table(cfg)?;
    let polar = PolarData::new(&table.rows, cfg.margin)?;
    let dir = out_dir(cfg)?;
    let mut outputs = Vec::new();
    let mut params = threshold_params(cfg)?;
    if let Some(grid) = &cfg.bandwidth_grid {
        let candidates: Vec<ThresholdParams> = grid.iter().map(|&h| ThresholdParams { h_w: h, ..params }).collect();
        let scores: Vec<ScoreRow> = threshold::check_score(polar.dim, &polar.radii, &polar.flat, &candidates, cfg.folds, &mut rng_for(cfg.seed))?;
        let best = threshold::best_score(&scores).context("no finite cross-validation score")?;
        params = best.params;
        let path = dir.join("scores.csv");
        let recs: Vec<ScoreRecord> = scores.iter().map(|s| ScoreRecord { h_w: s.params.h_w, h_r: s.params.h_r, score: s.score }).collect();
        io::write_records(&path, &recs)?;
        outputs.push(path);
    }
    let model = polar.threshold_model(params)?;
    let domain = match cfg.margin {
        Margin::Laplace => geomext_core::Domain::LaplaceCircle,
        Margin::Exponential => geomext_core::Domain::Simplex,
    };
    let grid = diagnostics::angle_grid(domain, polar.dim, cfg.curve_points.unwrap_or_else(|| diagnostics::default_curve_points(polar.dim)))?;
    let curve = grid
        .into_iter()
        .map(|w| Ok(diagnostics::CurvePoint { radius: model.quantile(&w)?, direction: w }))
        .collect::<Result<Vec<_>>>()?;
    let curve_path = dir.join("threshold_curve.csv");
    io::write_curve(&curve_path, &curve, "threshold")?;
    let json_path = dir.join("threshold.json");
    io::write_json(&json_path, &params)?;
    let exceed_path = dir.join("exceedances.csv");
    let recs = (0..polar.radii.len())
        .map(|i| {
            let t = model.quantile(polar.direction(i))?;
            Ok(ThresholdRecord { radius: polar.radii[i], threshold: t, exceeds: polar.radii[i] > t })
        })
        .collect::<Result<Vec<_>>>()?;
    io::write_records(&exceed_path, &recs)?;
    outputs.extend([json_path, curve_path, exceed_path]);
    finish(&dir, "threshold", cfg, outputs)
}

#[derive(Serialize)]
struct LambdaRecord {
    lambda: f64,
    score: f64,
    valid: bool,
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let table = input_table(cfg)?;
    let params = threshold_params(cfg)?;
    let outcome = fit_data(&table.rows, cfg, params, &mut rng_for(cfg.seed))?;
    let dir = out_dir(cfg)?;
    let model_path = dir.join("model.json");
    io::write_json(&model_path, &outcome.model)?;
    let mesh_path = dir.join("mesh.json");
    let gauge = outcome.model.radial_gauge().or(outcome.model.angular_gauge()).context("fit produced no gauge")?;
    io::write_json(&mesh_path, gauge.mesh())?;
    let mut outputs = vec![model_path, mesh_path];
    if let Some(sel) = &outcome.lambda {
        let path = dir.join("lambda_scores.csv");
        let recs: Vec<LambdaRecord> = sel.rows.iter().map(|r| LambdaRecord { lambda: r.lambda, score: r.score, valid: r.valid }).collect();
        io::write_records(&path, &recs)?;
        outputs.push(path);
    }
    finish(&dir, "fit", cfg, outputs)
}

/// Model and threshold rebuilt from the fit output and the data.
fn load_model(cfg: &RunConfig) -> Result<(Table, FittedModel, ThresholdModel)> {
    let path = cfg.model.as_ref().context("no model file: set `model` or pass --model")?;
    let model: FittedModel = io::read_json(path)?;
    let table = input_table(cfg)?;
    let params = match model.threshold {
        Some(p) => p,
        None => threshold_params(cfg)?,
    };
    let threshold = PolarData::new(&table.rows, cfg.margin)?.threshold_model(params)?;
    Ok((table, model, threshold))
}

#[derive(Serialize)]
struct ProbabilityFile<'a> {
    regions: &'a [RegionEstimate],
    acceptance_rate: Option<f64>,
}

pub fn cmd_extrapolate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (table, model, threshold) = load_model(cfg)?;
    let regions = cfg.regions_for(table.dim());
    if regions.is_empty() {
        bail!("no regions: set `regions` in the configuration");
    }
    let (rows, cloud) = extrapolate(&model, &threshold, &regions, cfg, &mut rng_for(cfg.seed))?;
    let dir = out_dir(cfg)?;
    let path = dir.join("probabilities.json");
    io::write_json(&path, &ProbabilityFile { regions: &rows, acceptance_rate: cloud.acceptance_rate })?;
    let mut outputs = vec![path];
    if cfg.write_cloud {
        let p = dir.join("cloud.csv");
        io::write_table(&p, &table.names, &cloud.points)?;
        outputs.push(p);
    }
    finish(&dir, "extrapolate", cfg, outputs)
}

#[derive(Serialize)]
struct ChiRecord {
    u: f64,
    model: f64,
    se: f64,
    empirical: f64,
    u0: f64,
}

pub fn cmd_diagnose(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (table, model, threshold) = load_model(cfg)?;
    let gauge = model.radial_gauge().context("diagnostics need a radial gauge")?;
    let tau = model.threshold.map_or(cfg.threshold.tau, |p| p.tau);
    let dir = out_dir(cfg)?;
    let mut rng = rng_for(cfg.seed);
    let mut outputs = Vec::new();

    let pp: Vec<PpQqRow> = diagnostics::pp_qq_data(gauge, &model.exceedances)?;
    let p = dir.join("ppqq.csv");
    io::write_records(&p, &pp)?;
    outputs.push(p);

    let dim = gauge.dim();
    let domain = gauge.mesh().domain();
    let dirs = diagnostics::angle_grid(domain, dim, cfg.curve_points.unwrap_or_else(|| diagnostics::default_curve_points(dim)))?;
    for &t in &cfg.periods {
        let curve = diagnostics::return_curve(gauge, tau, t, &dirs)?;
        let p = dir.join(format!("return_curve_{t}.csv"));
        io::write_curve(&p, &curve.points, "radius")?;
        outputs.push(p);
    }

    let subsets = cfg.chi_subsets.clone().unwrap_or_else(|| default_subsets(dim));
    for s in &subsets {
        if s.iter().any(|&j| j >= dim) {
            bail!("chi subset {s:?} names a coordinate beyond {dim}");
        }
        let est = chi_for_subset(&model, &threshold, &table.rows, s, cfg, &mut rng)?;
        let emp = est.empirical.clone().unwrap_or_default();
        let recs: Vec<ChiRecord> = (0..est.u.len())
            .map(|i| ChiRecord { u: est.u[i], model: est.model[i], se: est.se[i], empirical: emp[i], u0: est.u0 })
            .collect();
        let name = s.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join("");
        let p = dir.join(format!("chi_{name}.csv"));
        io::write_records(&p, &recs)?;
        outputs.push(p);
    }

    let surfaces = diagnostics::export_limit_set(gauge, domain, cfg.limit_set_points, cfg.projection_mesh)?;
    let p = dir.join("limit_set.csv");
    io::write_limit_set(&p, &surfaces)?;
    outputs.push(p);
    finish(&dir, "diagnose", cfg, outputs)
}

/// Mesh read from JSON, checked for dimension.
pub fn load_mesh(path: &Path, dim: usize) -> Result<SimplexMesh> {
    MeshSpec::File { path: path.to_path_buf() }.build(dim)
}
