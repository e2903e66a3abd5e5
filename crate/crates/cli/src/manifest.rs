//! Run manifests: the resolved config, its hash, the seed and checksums of
//! every file written.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::Result;
use crate::registry::Outcome;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub experiment: String,
    pub master_seed: u64,
    pub config_hash: String,
    pub config: toml::Table,
    pub derived: BTreeMap<String, serde_json::Value>,
    pub outputs: Vec<OutputFile>,
}

impl Manifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// Writes every table of `outcome` and the manifest into `dir`.
pub fn write_run(dir: &Path, config: &Config, outcome: &Outcome) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let mut outputs = Vec::with_capacity(outcome.tables.len());
    for t in &outcome.tables {
        let path = dir.join(&t.file);
        lqg_core::io::write_csv(&path, &t.header, &t.rows)?;
        outputs.push(OutputFile { path: t.file.clone(), sha256: sha256_file(&path)? });
    }
    let m = Manifest {
        tool_version: TOOL_VERSION.into(),
        experiment: config.experiment.name.into(),
        master_seed: config.seed,
        config_hash: config.hash(),
        config: config.table.clone(),
        derived: outcome.derived.clone(),
        outputs,
    };
    std::fs::write(dir.join(MANIFEST_FILE), m.to_json()?)?;
    Ok(m)
}

/// Files whose checksum no longer matches the manifest.
pub fn verify(dir: &Path, m: &Manifest) -> Result<Vec<String>> {
    let mut bad = Vec::new();
    for o in &m.outputs {
        let p = dir.join(&o.path);
        if !p.exists() || sha256_file(&p)? != o.sha256 {
            bad.push(o.path.clone());
        }
    }
    Ok(bad)
}
