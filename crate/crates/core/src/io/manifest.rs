use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSummary {
    pub cutoff: u32,
    pub alpha: f64,
    pub modes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Everything needed to re-run a command: the resolved configuration, the
/// argument vector and the master seed, plus digests of what it wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub basis: BasisSummary,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputRecord>,
    /// Inputs read from files other than the configuration.
    #[serde(default)]
    pub inputs: BTreeMap<String, serde_json::Value>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

impl RunManifest {
    pub fn new(command: &str, args: &[String], cfg: &ExperimentConfig, modes: usize) -> Self {
        RunManifest {
            tool: "sgfluid".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args: args.to_vec(),
            seed: cfg.seed,
            config_hash: cfg.hash(),
            config: cfg.to_value(),
            basis: BasisSummary {
                cutoff: cfg.cutoff,
                alpha: cfg.alpha,
                modes,
            },
            started_unix: now(),
            finished_unix: 0,
            outputs: Vec::new(),
            inputs: BTreeMap::new(),
        }
    }

    /// Registers `name` inside `dir` with its digest.
    pub fn record(&mut self, dir: &Path, name: &str) -> Result<()> {
        let p = dir.join(name);
        self.outputs.push(OutputRecord {
            path: name.into(),
            sha256: sha256_file(&p)?,
            bytes: std::fs::metadata(&p)?.len(),
        });
        Ok(())
    }

    /// The configuration embedded in the manifest.
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_value(self.config.clone())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn write(&mut self, path: &Path) -> Result<()> {
        self.finished_unix = now();
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
