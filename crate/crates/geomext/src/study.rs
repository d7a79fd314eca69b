//! Replicate study: simulate, fit each configuration, estimate region
//! probabilities and compare with reference values on the log scale.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use geomext_core::data::{self, CopulaSpec, Margin};
use geomext_core::fitting;
use geomext_core::Setup;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RegionSpec, RunConfig};
use crate::io;
use crate::manifest::write_manifest;
use crate::pipeline::{extrapolate, fit_prepared, prepare};

/// Reference probability of one region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub region: String,
    pub probability: f64,
    /// `exact` or `simulation`.
    pub method: String,
    /// Monte Carlo standard error; zero for exact values.
    pub se: f64,
}

/// One estimate from one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub setup: String,
    pub region: String,
    pub estimate: f64,
    pub se: f64,
    pub hits: usize,
    pub log_estimate: f64,
    pub log_truth: f64,
    pub log_error: f64,
    pub acceptance_rate: Option<f64>,
    /// Largest distance of a coordinate maximum of the fitted limit set
    /// from one, for bounded fits.
    pub box_gap: Option<f64>,
    /// Whether every bounding iteration enlarged the frozen node set.
    pub freeze_growing: Option<bool>,
    /// Failure message; the numeric fields are NaN when set.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setup: String,
    pub region: String,
    pub truth: f64,
    /// Root mean squared error of the log-probability estimates.
    pub rmse: f64,
    pub median_log_error: f64,
    pub zero_hits: usize,
    pub failures: usize,
    pub replications: usize,
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub truth: Vec<Truth>,
    pub rows: Vec<ReplicationRow>,
    pub summary: Vec<SummaryRow>,
}

/// Generator for replication `rep`: one ChaCha stream per replication.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64 + 1);
    rng
}

const TRUTH_CHUNK: usize = 100_000;

/// Closed-form box probabilities where available, direct simulation of
/// `samples` points otherwise.
pub fn reference_probabilities(spec: &CopulaSpec, margin: Margin, regions: &[RegionSpec], samples: usize, seed: u64) -> Result<Vec<Truth>> {
    let boxes = regions.iter().map(RegionSpec::region).collect::<Result<Vec<_>>>()?;
    let exact: Vec<Option<f64>> = if margin == Margin::Exponential {
        boxes.iter().map(|b| spec.box_probability(&b.lower, &b.upper)).collect()
    } else {
        vec![None; boxes.len()]
    };
    let missing: Vec<usize> = (0..boxes.len()).filter(|&i| exact[i].is_none()).collect();
    let mut counts = vec![0usize; boxes.len()];
    if !missing.is_empty() {
        if samples == 0 {
            bail!("no closed form for some regions and `truth_samples` is zero");
        }
        let chunks = samples.div_ceil(TRUTH_CHUNK);
        let per_chunk = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7275_7468);
                rng.set_stream(c as u64);
                let size = TRUTH_CHUNK.min(samples - c * TRUTH_CHUNK);
                let rows = data::simulate(spec, margin, size, &mut rng)?;
                Ok(missing.iter().map(|&i| rows.iter().filter(|x| boxes[i].contains(x)).count()).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        for c in per_chunk {
            for (k, &i) in missing.iter().enumerate() {
                counts[i] += c[k];
            }
        }
    }
    Ok(regions
        .iter()
        .enumerate()
        .map(|(i, r)| match exact[i] {
            Some(p) => Truth { region: r.label(i), probability: p, method: "exact".into(), se: 0.0 },
            None => {
                let p = counts[i] as f64 / samples as f64;
                Truth { region: r.label(i), probability: p, method: "simulation".into(), se: (p * (1.0 - p) / samples as f64).sqrt() }
            }
        })
        .collect())
}

fn failed_row(rep: usize, setup: Setup, region: String, log_truth: f64, err: &anyhow::Error) -> ReplicationRow {
    ReplicationRow {
        replication: rep,
        setup: setup.label().into(),
        region,
        estimate: f64::NAN,
        se: f64::NAN,
        hits: 0,
        log_estimate: f64::NAN,
        log_truth,
        log_error: f64::NAN,
        acceptance_rate: None,
        box_gap: None,
        freeze_growing: None,
        error: Some(format!("{err:#}")),
    }
}

/// Runs one replication for every configured setup.
pub fn run_replication(cfg: &RunConfig, spec: &CopulaSpec, regions: &[RegionSpec], truth: &[Truth], rep: usize) -> Vec<ReplicationRow> {
    let mut rng = replication_rng(cfg.seed, rep);
    let log_truth: Vec<f64> = truth.iter().map(|t| t.probability.ln()).collect();
    let fail_all = |setups: &[Setup], e: &anyhow::Error| {
        let mut out = Vec::new();
        for &s in setups {
            for (i, r) in regions.iter().enumerate() {
                out.push(failed_row(rep, s, r.label(i), log_truth[i], e));
            }
        }
        out
    };
    let prep = match data::simulate(spec, cfg.margin, cfg.n, &mut rng)
        .map_err(anyhow::Error::from)
        .and_then(|rows| prepare(&rows, cfg, cfg.threshold))
    {
        Ok(p) => p,
        Err(e) => {
            log::warn!("replication {rep}: {e:#}");
            return fail_all(&cfg.setups, &e);
        }
    };
    let mut out = Vec::new();
    for &setup in &cfg.setups {
        let result = fit_prepared(&prep, cfg, Some(setup), &mut rng).and_then(|(model, _)| {
            let (est, cloud) = extrapolate(&model, &prep.threshold, regions, cfg, &mut rng)?;
            let fit = model.radial.as_ref().context("model has no radial gauge")?;
            let gap = fit.bounding.as_ref().map(|_| fitting::box_gap(&fit.gauge));
            let growing = fit.bounding.as_ref().map(|b| b.frozen_sizes.windows(2).all(|p| p[1] > p[0]));
            Ok((est, cloud, gap, growing))
        });
        match result {
            Ok((estimates, cloud, box_gap, freeze_growing)) => {
                for (i, e) in estimates.into_iter().enumerate() {
                    let log_estimate = e.estimate.ln();
                    out.push(ReplicationRow {
                        replication: rep,
                        setup: setup.label().into(),
                        region: e.region,
                        estimate: e.estimate,
                        se: e.se,
                        hits: e.hits,
                        log_estimate,
                        log_truth: log_truth[i],
                        log_error: log_estimate - log_truth[i],
                        acceptance_rate: cloud.acceptance_rate,
                        box_gap,
                        freeze_growing,
                        error: None,
                    });
                }
            }
            Err(e) => {
                log::warn!("replication {rep}, {}: {e:#}", setup.label());
                out.extend(fail_all(&[setup], &e));
            }
        }
    }
    out
}

fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// RMSE and median of the log errors per setup and region. Zero-hit
/// replications have an infinite log error and make the RMSE infinite;
/// failed replications are left out and counted.
pub fn summarise(rows: &[ReplicationRow], setups: &[Setup], truth: &[Truth]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for s in setups {
        for t in truth {
            let sel: Vec<&ReplicationRow> = rows.iter().filter(|r| r.setup == s.label() && r.region == t.region).collect();
            let ok: Vec<&&ReplicationRow> = sel.iter().filter(|r| r.error.is_none()).collect();
            let mut errs: Vec<f64> = ok.iter().map(|r| r.log_error).collect();
            let rmse = if errs.is_empty() { f64::NAN } else { (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt() };
            out.push(SummaryRow {
                setup: s.label().into(),
                region: t.region.clone(),
                truth: t.probability,
                rmse,
                median_log_error: median(&mut errs),
                zero_hits: ok.iter().filter(|r| r.hits == 0).count(),
                failures: sel.len() - ok.len(),
                replications: sel.len(),
            });
        }
    }
    out
}

/// Runs the whole study in memory.
pub fn run_study(cfg: &RunConfig) -> Result<StudyResult> {
    let spec = cfg.copula_spec()?;
    let regions = cfg.regions_for(spec.dim());
    if regions.is_empty() {
        bail!("no study regions for dimension {}: set `regions`", spec.dim());
    }
    if cfg.setups.is_empty() {
        bail!("no fit configurations: set `setups`");
    }
    let work = || -> Result<StudyResult> {
        let truth = reference_probabilities(&spec, cfg.margin, &regions, cfg.truth_samples, cfg.seed)?;
        if let Some(t) = truth.iter().find(|t| !(t.probability > 0.0)) {
            bail!("region {} has zero reference probability; increase `truth_samples`", t.region);
        }
        let per_rep: Vec<Vec<ReplicationRow>> =
            (0..cfg.replications).into_par_iter().map(|rep| run_replication(cfg, &spec, &regions, &truth, rep)).collect();
        let rows: Vec<ReplicationRow> = per_rep.into_iter().flatten().collect();
        let summary = summarise(&rows, &cfg.setups, &truth);
        Ok(StudyResult { truth, rows, summary })
    };
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build().context("building worker pool")?;
        pool.install(work)
    } else {
        work()
    }
}

/// Replications by regions of log-probability estimates for one setup.
pub fn boxplot_rows(result: &StudyResult, setup: Setup, replications: usize) -> Vec<Vec<f64>> {
    (0..replications)
        .map(|rep| {
            result
                .truth
                .iter()
                .map(|t| {
                    result
                        .rows
                        .iter()
                        .find(|r| r.replication == rep && r.setup == setup.label() && r.region == t.region)
                        .map_or(f64::NAN, |r| r.log_estimate)
                })
                .collect()
        })
        .collect()
}

pub fn cmd_study(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let result = run_study(cfg)?;
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut outputs = Vec::new();
    let p = dir.join("replications.csv");
    io::write_records(&p, &result.rows)?;
    outputs.push(p);
    let names: Vec<String> = result.truth.iter().map(|t| t.region.clone()).collect();
    for &s in &cfg.setups {
        let p = dir.join(format!("boxplot_{}.csv", s.label()));
        io::write_table(&p, &names, &boxplot_rows(&result, s, cfg.replications))?;
        outputs.push(p);
    }
    let p = dir.join("summary.csv");
    io::write_records(&p, &result.summary)?;
    outputs.push(p);
    let p = dir.join("truth.json");
    io::write_json(&p, &result.truth)?;
    outputs.push(p);
    outputs.push(write_manifest(&dir, "study", cfg, &outputs)?);
    Ok(outputs)
}
