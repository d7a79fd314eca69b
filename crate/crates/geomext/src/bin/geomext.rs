use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use geomext::config::{MeshSpec, RunConfig};
use geomext::{pipeline, study};
use geomext_core::data::CopulaSpec;
use geomext_core::gauge::exchangeable_correlation;
use geomext_core::Setup;
use serde::de::DeserializeOwned;

/// Geometric extremes: limit-set gauges fitted to multivariate data.
#[derive(Parser)]
#[command(name = "geomext", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate from a dependence model in exponential or Laplace margins.
    Simulate(Overrides),
    /// Transform raw data to exponential or Laplace margins.
    Transform(Overrides),
    /// Fit the radial threshold, optionally cross-validating the angular
    /// bandwidth.
    Threshold(Overrides),
    /// Fit a gauge to exceedances of the threshold.
    Fit(Overrides),
    /// Estimate probabilities of extreme regions from a fitted model.
    Extrapolate(Overrides),
    /// PP/QQ data, return curves, extremal dependence and the limit set.
    Diagnose(Overrides),
    /// Replicate study of probability estimation.
    Study(Overrides),
}

/// Flags override the configuration file.
#[derive(Args, Clone, Default)]
struct Overrides {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// exponential or laplace.
    #[arg(long)]
    margin: Option<String>,
    /// Benchmark distribution 1 to 7.
    #[arg(long)]
    benchmark: Option<usize>,
    /// logistic, inverted_logistic or gaussian; with --alpha or --rho.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Exchangeable correlation for the Gaussian family.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Sample size to simulate.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    h_r: Option<f64>,
    #[arg(long)]
    h_w: Option<f64>,
    /// Threshold JSON written by `threshold`.
    #[arg(long)]
    threshold_file: Option<PathBuf>,
    /// Comma-separated angular bandwidths to cross-validate.
    #[arg(long, value_delimiter = ',')]
    bandwidth_grid: Option<Vec<f64>>,
    /// Mesh JSON file.
    #[arg(long)]
    mesh_file: Option<PathBuf>,
    /// SS1 to SS6.
    #[arg(long)]
    setup: Option<String>,
    /// radial, angular or joint.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    bounded: Option<bool>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma-separated penalties to cross-validate.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    n_star: Option<usize>,
    #[arg(long)]
    write_cloud: bool,
    #[arg(long)]
    replications: Option<usize>,
    /// Comma-separated fit configurations for `study`.
    #[arg(long, value_delimiter = ',')]
    setups: Option<Vec<String>>,
    /// Worker threads for `study`.
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_name<T: DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase())).map_err(|_| anyhow::anyhow!("unknown {what} `{s}`"))
}

fn family_spec(o: &Overrides) -> Result<Option<CopulaSpec>> {
    let Some(f) = &o.family else { return Ok(None) };
    let need_alpha = || o.alpha.ok_or_else(|| anyhow::anyhow!("--family {f} needs --alpha"));
    Ok(Some(match f.as_str() {
        "logistic" => CopulaSpec::Logistic { dim: o.dim, alpha: need_alpha()? },
        "inverted_logistic" => CopulaSpec::InvertedLogistic { dim: o.dim, alpha: need_alpha()? },
        "gaussian" => {
            let rho = o.rho.ok_or_else(|| anyhow::anyhow!("--family gaussian needs --rho"))?;
            CopulaSpec::Gaussian { dim: o.dim, correlation: exchangeable_correlation(o.dim, rho) }
        }
        other => bail!("unknown family `{other}`"),
    }))
}

fn build_config(o: &Overrides) -> Result<(RunConfig, Option<String>)> {
    let (mut cfg, source) = match &o.config {
        Some(p) => {
            let (c, s) = RunConfig::load(p)?;
            (c, Some(s))
        }
        None => (RunConfig::default(), None),
    };
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = &o.$field {
                cfg.$field = v.clone();
            }
        };
    }
    if let Some(v) = &o.out {
        cfg.output = Some(v.clone());
    }
    if let Some(v) = &o.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = &o.model {
        cfg.model = Some(v.clone());
    }
    if let Some(v) = &o.threshold_file {
        cfg.threshold_file = Some(v.clone());
    }
    set!(seed);
    set!(n);
    set!(lambda);
    set!(n_star);
    set!(replications);
    set!(threads);
    set!(bounded);
    if let Some(m) = &o.margin {
        cfg.margin = parse_name("margin", m)?;
    }
    if let Some(k) = o.benchmark {
        cfg.benchmark = Some(k);
        cfg.copula = None;
    }
    if let Some(spec) = family_spec(o)? {
        cfg.copula = Some(spec);
        cfg.benchmark = None;
    }
    if let Some(t) = o.tau {
        cfg.threshold.tau = t;
    }
    if let Some(h) = o.h_r {
        cfg.threshold.h_r = h;
    }
    if let Some(h) = o.h_w {
        cfg.threshold.h_w = h;
    }
    if let Some(g) = &o.bandwidth_grid {
        cfg.bandwidth_grid = Some(g.clone());
    }
    if let Some(g) = &o.lambda_grid {
        cfg.lambda_grid = Some(g.clone());
    }
    if let Some(p) = &o.mesh_file {
        cfg.mesh = Some(MeshSpec::File { path: p.clone() });
    }
    if let Some(s) = &o.setup {
        cfg.setup = Some(s.parse::<Setup>()?);
    }
    if let Some(m) = &o.mode {
        cfg.mode = parse_name("mode", m)?;
    }
    if let Some(ss) = &o.setups {
        cfg.setups = ss.iter().map(|s| s.parse::<Setup>()).collect::<geomext_core::Result<_>>()?;
    }
    if o.write_cloud {
        cfg.write_cloud = true;
    }
    Ok((cfg, source))
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let (name, o) = match &cli.command {
        Command::Simulate(o) => ("simulate", o),
        Command::Transform(o) => ("transform", o),
        Command::Threshold(o) => ("threshold", o),
        Command::Fit(o) => ("fit", o),
        Command::Extrapolate(o) => ("extrapolate", o),
        Command::Diagnose(o) => ("diagnose", o),
        Command::Study(o) => ("study", o),
    };
    let (cfg, source) = build_config(o)?;
    cfg.validate(source.as_deref())?;
    log::info!("running {name}");
    match cli.command {
        Command::Simulate(_) => pipeline::cmd_simulate(&cfg),
        Command::Transform(_) => pipeline::cmd_transform(&cfg),
        Command::Threshold(_) => pipeline::cmd_threshold(&cfg),
        Command::Fit(_) => pipeline::cmd_fit(&cfg),
        Command::Extrapolate(_) => pipeline::cmd_extrapolate(&cfg),
        Command::Diagnose(_) => pipeline::cmd_diagnose(&cfg),
        Command::Study(_) => study::cmd_study(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(outputs) => {
            for p in outputs {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
