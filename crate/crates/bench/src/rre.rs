//! Residual-error sweep over element count, spacing and method.

use std::fmt::Write as _;
use std::time::Instant;

use gam_core::corrchan::{build_correlation_matrix, reduce_to_equivalent, sample_channel};
use gam_core::echelon::{decompose, DecomposeOptions, Method};
use gam_core::rng::derive_seed;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{write_file, Manifest};

/// One decomposition of one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct RreSample {
    pub n: usize,
    pub spacing: f64,
    pub method: Method,
    pub realization: usize,
    pub channel_seed: u64,
    pub rre: f64,
    pub seconds: f64,
}

/// Aggregate over realizations for one `(n, d, method)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RreRow {
    pub n: usize,
    pub spacing: f64,
    pub method: Method,
    pub realizations: usize,
    pub mean: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub seconds_mean: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RreReport {
    pub rows: Vec<RreRow>,
    pub samples: Vec<RreSample>,
}

impl RreReport {
    pub fn row(&self, n: usize, spacing: f64, method: Method) -> Option<&RreRow> {
        self.rows.iter().find(|r| r.n == n && r.spacing == spacing && r.method == method)
    }

    pub fn channel_seeds(&self) -> Vec<u64> {
        let mut seeds: Vec<u64> = Vec::new();
        for s in &self.samples {
            if seeds.last() != Some(&s.channel_seed) {
                seeds.push(s.channel_seed);
            }
        }
        seeds
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let pos = q.clamp(0.0, 1.0) * (len - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(len - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Channel seed of realization `r` in sweep cell `cell`.
pub fn cell_seed(master: u64, cell: usize, r: usize) -> u64 {
    derive_seed(master, &[cell as u64, r as u64])
}

pub fn run_rre(cfg: &ExperimentConfig) -> Result<RreReport> {
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    let mut cell = 0;
    for n in cfg.element_counts() {
        for spacing in cfg.spacings() {
            let grid = cfg.grid_for(n, spacing)?;
            let corr = build_correlation_matrix(&grid)?;
            let per_realization = (0..cfg.realizations)
                .into_par_iter()
                .map(|r| -> Result<Vec<RreSample>> {
                    let seed = cell_seed(cfg.seed, cell, r);
                    let ch = sample_channel(&grid, &cfg.attenuation, cfg.n_r, &corr, seed)?;
                    let eq = reduce_to_equivalent(&ch, cfg.rank_tolerance)?;
                    let opts = DecomposeOptions { rotation_trials: cfg.rotation_trials, seed: derive_seed(seed, &[1]) };
                    cfg.methods
                        .iter()
                        .map(|&method| {
                            let start = Instant::now();
                            let dec = decompose(&eq, method, &opts)?;
                            let seconds = start.elapsed().as_secs_f64();
                            Ok(RreSample { n, spacing, method, realization: r, channel_seed: seed, rre: dec.rre, seconds })
                        })
                        .collect()
                })
                .collect::<Result<Vec<_>>>()?;
            let cell_samples: Vec<RreSample> = per_realization.into_iter().flatten().collect();
            for &method in &cfg.methods {
                let picked: Vec<&RreSample> = cell_samples.iter().filter(|s| s.method == method).collect();
                let mut values: Vec<f64> = picked.iter().map(|s| s.rre).collect();
                values.sort_by(f64::total_cmp);
                let count = values.len();
                rows.push(RreRow {
                    n,
                    spacing,
                    method,
                    realizations: count,
                    mean: values.iter().sum::<f64>() / count as f64,
                    median: quantile(&values, 0.5),
                    p10: quantile(&values, 0.1),
                    p90: quantile(&values, 0.9),
                    seconds_mean: cfg.record_timing.then(|| picked.iter().map(|s| s.seconds).sum::<f64>() / count as f64),
                });
            }
            eprintln!("rre-bench: n = {n}, d = {spacing} done ({} realizations)", cfg.realizations);
            samples.extend(cell_samples);
            cell += 1;
        }
    }
    Ok(RreReport { rows, samples })
}

pub const RRE_CSV_HEADER: &str = "n,d_over_lambda,method,realizations,rre_mean,rre_median,rre_p10,rre_p90,seconds_mean";

pub fn rre_csv(rows: &[RreRow]) -> String {
    let mut out = String::from(RRE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let secs = r.seconds_mean.map(|s| format!("{s:.6e}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{}",
            r.n, r.spacing, r.method, r.realizations, r.mean, r.median, r.p10, r.p90, secs
        );
    }
    out
}

/// Per-realization values, for plotting distributions.
pub fn samples_csv(samples: &[RreSample]) -> String {
    let mut out = String::from("n,d_over_lambda,method,realization,channel_seed,rre\n");
    for s in samples {
        let _ = writeln!(out, "{},{},{},{},{},{:.17e}", s.n, s.spacing, s.method, s.realization, s.channel_seed, s.rre);
    }
    out
}

/// Runs the sweep and writes `rre.csv`, `rre_samples.csv` and the manifest.
pub fn rre_bench(cfg: &ExperimentConfig) -> Result<RreReport> {
    let report = run_rre(cfg)?;
    write_file(&cfg.out_dir, "rre.csv", &rre_csv(&report.rows))?;
    write_file(&cfg.out_dir, "rre_samples.csv", &samples_csv(&report.samples))?;
    let files = vec!["rre.csv".to_string(), "rre_samples.csv".to_string()];
    Manifest::new("rre-bench", cfg, report.channel_seeds(), files).write(&cfg.out_dir)?;
    Ok(report)
}
