//! Run manifests: what was run, with which configuration, producing which
//! files.

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub core_version: String,
    /// SHA-256 of the effective configuration serialised as compact JSON.
    pub config_hash: String,
    pub config: RunConfig,
    pub outputs: Vec<PathBuf>,
}

pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let bytes = serde_json::to_vec(cfg)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, outputs: &[PathBuf]) -> Result<PathBuf> {
    let m = Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        core_version: geomext_core::VERSION.to_string(),
        config_hash: config_hash(cfg)?,
        config: cfg.clone(),
        outputs: outputs.to_vec(),
    };
    let path = dir.join(MANIFEST_FILE);
    crate::io::write_json(&path, &m)?;
    Ok(path)
}
