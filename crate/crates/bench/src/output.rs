//! File output and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};

pub const VERSION: &str = concat!("gam-bench/", env!("CARGO_PKG_VERSION"));

/// Writes `contents` to `dir/name`, creating `dir` as needed.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| BenchError::io(&path, e))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(dir, name, &text)
}

/// Everything needed to regenerate a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Channel seeds in realization order (empty when not applicable).
    pub channel_seeds: Vec<u64>,
    /// File names relative to the output directory.
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, channel_seeds: Vec<u64>, files: Vec<String>) -> Self {
        Self {
            command: command.to_string(),
            version: VERSION.to_string(),
            config_sha256: cfg.sha256(),
            seed: cfg.seed,
            channel_seeds,
            files,
            config: cfg.clone(),
        }
    }

    /// File name used by [`Manifest::write`], e.g. `manifest_rre_bench.json`.
    pub fn file_name(&self) -> String {
        format!("manifest_{}.json", self.command.replace('-', "_"))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        write_json(dir, &self.file_name(), self)
    }
}
