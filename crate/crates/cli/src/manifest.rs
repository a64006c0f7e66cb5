//! Run manifest: what was written, with content hashes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{hex_digest, ExperimentConfig};
use crate::error::CliResult;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Records,
    G2Csv,
    SweepCsv,
    SummaryCsv,
    Config,
    Plot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Path relative to the run directory.
    pub path: String,
    pub kind: OutputKind,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub step: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub superrad: String,
    pub superrad_cli: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub experiment: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub versions: Versions,
    pub threads: Option<usize>,
    pub wall_time_s: f64,
    pub complete: bool,
    pub outputs: Vec<OutputEntry>,
    pub failures: Vec<Failure>,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, threads: Option<usize>) -> Self {
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            experiment: cfg.experiment.name().into(),
            config_hash: cfg.hash(),
            master_seed: cfg.master_seed,
            versions: Versions {
                superrad: superrad::VERSION.into(),
                superrad_cli: env!("CARGO_PKG_VERSION").into(),
            },
            threads,
            wall_time_s: 0.0,
            complete: true,
            outputs: Vec::new(),
            failures: Vec::new(),
        }
    }

    /// Hashes `rel` under `dir` and lists it.
    pub fn add(&mut self, dir: &Path, rel: &str, kind: OutputKind) -> CliResult<()> {
        let bytes = fs::read(dir.join(rel))?;
        self.outputs.push(OutputEntry {
            path: rel.into(),
            kind,
            sha256: hex_digest(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn fail(&mut self, step: impl Into<String>, error: impl ToString) {
        self.complete = false;
        self.failures.push(Failure {
            step: step.into(),
            error: error.to_string(),
        });
    }

    pub fn outputs_of(&self, kind: OutputKind) -> impl Iterator<Item = &OutputEntry> {
        self.outputs.iter().filter(move |o| o.kind == kind)
    }

    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n")?;
        Ok(path)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| crate::error::CliError::Config(format!("{}: {e}", path.display())))
    }
}
