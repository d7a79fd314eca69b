//! Run configuration: a JSON file with every field optional, overridden
//! by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use geomext_core::data::{CopulaSpec, Margin};
use geomext_core::optim::NelderMeadOptions;
use geomext_core::sampling::{ExtremalRegion, DEFAULT_BURN_IN, DEFAULT_N_STAR};
use geomext_core::{FitConfig, FitMode, Setup, SimplexMesh, ThresholdParams};
use serde::{Deserialize, Serialize};

/// Reference-angle mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    /// Equally spaced nodes (d = 2) or grid spacing `1/resolution` (d = 3).
    Regular { resolution: usize },
    /// Vertices, centre and face centres (d >= 4).
    Sparse { refine: bool },
    /// Equally spaced angles on the L1 circle.
    Laplace { nodes: usize },
    /// Mesh JSON written by `fit`, or hand-made `{dim, nodes, regions}`.
    File { path: PathBuf },
}

impl MeshSpec {
    /// Default mesh for a dimension and margin.
    pub fn default_for(dim: usize, margin: Margin) -> MeshSpec {
        match (margin, dim) {
            (Margin::Laplace, _) => MeshSpec::Laplace { nodes: 16 },
            (_, 2) => MeshSpec::Regular { resolution: 11 },
            (_, 3) => MeshSpec::Regular { resolution: 6 },
            _ => MeshSpec::Sparse { refine: true },
        }
    }

    pub fn build(&self, dim: usize) -> Result<SimplexMesh> {
        let mesh = match self {
            MeshSpec::Regular { resolution } => SimplexMesh::regular(dim, *resolution)?,
            MeshSpec::Sparse { refine } => SimplexMesh::sparse(dim, *refine)?,
            MeshSpec::Laplace { nodes } => {
                if dim != 2 {
                    bail!("Laplace meshes exist only for two dimensions");
                }
                SimplexMesh::laplace(*nodes)?
            }
            MeshSpec::File { path } => crate::io::read_json(path)?,
        };
        if mesh.dim() != dim {
            bail!("mesh has dimension {} but the data have {dim}", mesh.dim());
        }
        Ok(mesh)
    }
}

/// Box region in JSON form; a missing or null upper bound is unbounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<Option<f64>>,
}

impl RegionSpec {
    pub fn region(&self) -> Result<ExtremalRegion> {
        let upper = self.upper.iter().map(|u| u.unwrap_or(f64::INFINITY)).collect();
        Ok(ExtremalRegion::new(self.lower.clone(), upper)?)
    }

    pub fn from_bounds(name: &str, lower: &[f64], upper: &[f64]) -> RegionSpec {
        RegionSpec {
            name: Some(name.to_string()),
            lower: lower.to_vec(),
            upper: upper.iter().map(|&u| if u.is_finite() { Some(u) } else { None }).collect(),
        }
    }

    pub fn label(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| format!("B{}", index + 1))
    }
}

/// Study regions for two and three dimensions.
pub fn default_regions(dim: usize) -> Vec<RegionSpec> {
    match dim {
        2 => vec![
            RegionSpec::from_bounds("B1", &[10.0, 10.0], &[12.0, 12.0]),
            RegionSpec::from_bounds("B2", &[10.0, 6.0], &[12.0, 8.0]),
            RegionSpec::from_bounds("B3", &[10.0, 2.0], &[12.0, 4.0]),
        ],
        3 => vec![
            RegionSpec::from_bounds("B1", &[8.0, 8.0, 0.01], &[10.0, 10.0, 3.0]),
            RegionSpec::from_bounds("B2", &[8.0, 5.0, 0.01], &[10.0, 7.0, 3.0]),
            RegionSpec::from_bounds("B3", &[8.0, 2.0, 0.01], &[10.0, 4.0, 3.0]),
        ],
        _ => Vec::new(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    /// Output directory.
    pub output: Option<PathBuf>,
    /// Model JSON written by `fit`.
    pub model: Option<PathBuf>,
    pub seed: u64,
    pub margin: Margin,

    /// Dependence model to simulate from; `benchmark` picks one of the seven
    /// reference models instead.
    pub copula: Option<CopulaSpec>,
    pub benchmark: Option<usize>,
    pub n: usize,

    /// Marginal quantile above which a generalised Pareto tail is used.
    pub tail_quantile: f64,

    pub threshold: ThresholdParams,
    /// Threshold parameters written by `threshold`; replaces `threshold`.
    pub threshold_file: Option<PathBuf>,
    /// Angular bandwidths to cross-validate.
    pub bandwidth_grid: Option<Vec<f64>>,
    pub folds: usize,

    pub mesh: Option<MeshSpec>,
    pub setup: Option<Setup>,
    pub mode: FitMode,
    pub bounded: bool,
    pub lambda: f64,
    pub angular_lambda: f64,
    /// Penalty strengths to cross-validate for the radial or joint fit.
    pub lambda_grid: Option<Vec<f64>>,
    pub optimizer: NelderMeadOptions,

    pub n_star: usize,
    pub burn_in: usize,
    pub regions: Option<Vec<RegionSpec>>,
    pub write_cloud: bool,

    pub periods: Vec<f64>,
    pub curve_points: Option<usize>,
    pub chi_levels: Vec<f64>,
    /// Zero-based coordinate subsets; all pairs when absent.
    pub chi_subsets: Option<Vec<Vec<usize>>>,
    pub limit_set_points: usize,
    pub projection_mesh: usize,

    pub replications: usize,
    pub setups: Vec<Setup>,
    /// Direct-simulation size for reference probabilities without a closed
    /// form.
    pub truth_samples: usize,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            output: None,
            model: None,
            seed: 1,
            margin: Margin::Exponential,
            copula: None,
            benchmark: None,
            n: 5000,
            tail_quantile: 0.95,
            threshold: ThresholdParams::default(),
            threshold_file: None,
            bandwidth_grid: None,
            folds: 5,
            mesh: None,
            setup: None,
            mode: FitMode::Radial,
            bounded: false,
            lambda: geomext_core::fitting::DEFAULT_LAMBDA,
            angular_lambda: geomext_core::fitting::DEFAULT_ANGULAR_LAMBDA,
            lambda_grid: None,
            optimizer: NelderMeadOptions::default(),
            n_star: DEFAULT_N_STAR,
            burn_in: DEFAULT_BURN_IN,
            regions: None,
            write_cloud: false,
            periods: vec![50.0, 100.0],
            curve_points: None,
            chi_levels: vec![0.95, 0.97, 0.98, 0.99],
            chi_subsets: None,
            limit_set_points: 500,
            projection_mesh: 50,
            replications: 20,
            setups: vec![Setup::SS2, Setup::SS4],
            truth_samples: 10_000_000,
            threads: 0,
        }
    }
}

/// Line of the first occurrence of `"key"` in a JSON source.
fn key_line(source: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    source.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl RunConfig {
    /// Reads a configuration file. Parse errors carry line and column.
    pub fn load(path: &Path) -> Result<(RunConfig, String)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| {
            anyhow::anyhow!("{}:{}:{}: {}", path.display(), e.line(), e.column(), e)
        })?;
        Ok((cfg, text))
    }

    /// Copula to simulate from.
    pub fn copula_spec(&self) -> Result<CopulaSpec> {
        match (&self.copula, self.benchmark) {
            (Some(c), None) => Ok(c.clone()),
            (None, Some(k)) => Ok(CopulaSpec::benchmark(k)?),
            (None, None) => bail!("no dependence model given: set `copula` or `benchmark`"),
            (Some(_), Some(_)) => bail!("set only one of `copula` and `benchmark`"),
        }
    }

    pub fn fit_config(&self) -> Result<FitConfig> {
        let c = FitConfig { mode: self.mode, bounded: self.bounded, lambda: self.lambda, optimizer: self.optimizer };
        c.validate()?;
        Ok(c)
    }

    pub fn regions_for(&self, dim: usize) -> Vec<RegionSpec> {
        self.regions.clone().unwrap_or_else(|| default_regions(dim))
    }

    /// Checks value ranges. `source` is the configuration text, used to
    /// point at the offending line.
    pub fn validate(&self, source: Option<&str>) -> Result<()> {
        let fail = |key: &str, msg: String| -> Result<()> {
            match source.and_then(|s| key_line(s, key)) {
                Some(line) => bail!("line {line}: `{key}`: {msg}"),
                None => bail!("`{key}`: {msg}"),
            }
        };
        if let Err(e) = self.threshold.validate() {
            return fail("threshold", e.to_string());
        }
        if !(self.tail_quantile > 0.0 && self.tail_quantile < 1.0) {
            return fail("tail_quantile", "must lie in (0, 1)".into());
        }
        if self.setup.is_none() {
            if let Err(e) = self.fit_config() {
                let key = if self.bounded && self.mode == FitMode::Angular { "bounded" } else { "lambda" };
                return fail(key, e.to_string());
            }
        }
        if !(self.angular_lambda >= 0.0) {
            return fail("angular_lambda", "must be non-negative".into());
        }
        if self.folds < 2 {
            return fail("folds", "cross-validation needs at least two folds".into());
        }
        if self.n_star == 0 {
            return fail("n_star", "must be positive".into());
        }
        if self.n == 0 {
            return fail("n", "must be positive".into());
        }
        if let Some(g) = &self.bandwidth_grid {
            if g.is_empty() || g.iter().any(|&h| !(h > 0.0)) {
                return fail("bandwidth_grid", "bandwidths must be positive".into());
            }
        }
        if let Some(g) = &self.lambda_grid {
            if g.is_empty() || g.iter().any(|&l| !(l >= 0.0)) {
                return fail("lambda_grid", "penalties must be non-negative".into());
            }
        }
        if self.periods.iter().any(|&t| !(t > 1.0)) {
            return fail("periods", "return periods must exceed one".into());
        }
        if self.chi_levels.iter().any(|&u| !(u > 0.0 && u < 1.0)) {
            return fail("chi_levels", "levels must lie in (0, 1)".into());
        }
        if self.replications == 0 {
            return fail("replications", "must be positive".into());
        }
        if let Some(rs) = &self.regions {
            for r in rs {
                if let Err(e) = r.region() {
                    return fail("regions", e.to_string());
                }
            }
        }
        if let Some(k) = self.benchmark {
            if !(1..=7).contains(&k) {
                return fail("benchmark", "must be between 1 and 7".into());
            }
        }
        if let Some(c) = &self.copula {
            if let Err(e) = c.validate() {
                return fail("copula", e.to_string());
            }
        }
        Ok(())
    }
}
