//! Matrix files for the `decompose` and `channel-gen` commands.

use std::fs;
use std::path::Path;

use gam_core::corrchan::{build_correlation_matrix, reduce_to_equivalent, sample_channel, ChannelDump, ChannelRealization, EquivalentChannel};
use gam_core::echelon::{decompose, DecomposeOptions, DecompositionDump, EchelonDecomposition, Method};
use gam_core::linalg::{matrix_from_rows, matrix_to_rows, Pair};
use gam_core::CMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::output::{write_json, Manifest};
use crate::ser::pinned_channel_seed;

/// Plain complex matrix file: `{"matrix": [[[re, im], ...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub matrix: Vec<Vec<Pair>>,
}

/// Which of the accepted layouts a file used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Channel,
    Matrix,
    Decomposition,
}

/// Reads an equivalent channel from a channel dump (reduced on load), a
/// plain matrix file, or a decomposition dump (recombined as `B·C·Pᴴ`).
pub fn load_equivalent(path: &Path, rank_tolerance: f64) -> Result<(EquivalentChannel, InputKind)> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| BenchError::parse(path, e))?;
    let has = |key: &str| value.get(key).is_some();
    let (matrix, kind) = if has("H") {
        let dump: ChannelDump = serde_json::from_str(&text).map_err(|e| BenchError::parse(path, e))?;
        let ch = ChannelRealization::try_from(dump).map_err(|e| BenchError::parse(path, e))?;
        return Ok((reduce_to_equivalent(&ch, rank_tolerance)?, InputKind::Channel));
    } else if has("matrix") {
        let file: MatrixFile = serde_json::from_str(&text).map_err(|e| BenchError::parse(path, e))?;
        let m = matrix_from_rows(&file.matrix).ok_or_else(|| BenchError::parse(path, "matrix rows are empty or ragged"))?;
        (m, InputKind::Matrix)
    } else if has("C") && has("B") {
        let dump: DecompositionDump = serde_json::from_str(&text).map_err(|e| BenchError::parse(path, e))?;
        (dump.equivalent_matrix().map_err(|e| BenchError::parse(path, e))?, InputKind::Decomposition)
    } else {
        return Err(BenchError::parse(path, "expected a channel dump (\"H\"), a matrix file (\"matrix\") or a decomposition dump (\"B\", \"C\")"));
    };
    let eq = EquivalentChannel::from_matrix(matrix, rank_tolerance).map_err(|e| BenchError::parse(path, e))?;
    Ok((eq, kind))
}

/// Decomposes the matrix in `input` and writes the dump to `output`.
pub fn decompose_file(input: &Path, method: Method, opts: &DecomposeOptions, rank_tolerance: f64, output: &Path) -> Result<EchelonDecomposition> {
    let (eq, _) = load_equivalent(input, rank_tolerance)?;
    let dec = decompose(&eq, method, opts)?;
    let dir = output.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = output.file_name().and_then(|n| n.to_str()).ok_or_else(|| BenchError::Config(format!("invalid output path {}", output.display())))?;
    write_json(dir, name, &DecompositionDump::from(&dec))?;
    Ok(dec)
}

pub fn matrix_file(m: &CMatrix) -> MatrixFile {
    MatrixFile { matrix: matrix_to_rows(m) }
}

/// Samples the pinned channel and writes `channel.json` (raw gains),
/// `equivalent.json` (reduced matrix) and the manifest.
pub fn channel_gen(cfg: &ExperimentConfig) -> Result<EquivalentChannel> {
    let corr = build_correlation_matrix(&cfg.grid)?;
    let seed = pinned_channel_seed(cfg);
    let ch = sample_channel(&cfg.grid, &cfg.attenuation, cfg.n_r, &corr, seed)?;
    let eq = reduce_to_equivalent(&ch, cfg.rank_tolerance)?;
    write_json(&cfg.out_dir, "channel.json", &ChannelDump::from(&ch))?;
    write_json(&cfg.out_dir, "equivalent.json", &matrix_file(&eq.hcheck))?;
    let files = vec!["channel.json".to_string(), "equivalent.json".to_string()];
    Manifest::new("channel-gen", cfg, vec![seed], files).write(&cfg.out_dir)?;
    Ok(eq)
}
