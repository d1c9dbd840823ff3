//! SER sweeps for GAM and QR-SIC.

use std::fmt::Write as _;

use gam_core::corrchan::{build_correlation_matrix, reduce_to_equivalent, sample_channel, CorrelationMatrix, EquivalentChannel};
use gam_core::echelon::{cp_decompose, qr_decompose};
use gam_core::rng::derive_seed;
use gam_core::xcvr::{monte_carlo_ser, plan_subchannels, ser_csv, Mode, Noise, SerConfig, SerReport, SubchannelPlan, SER_CSV_HEADER};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, SerMode};
use crate::error::Result;
use crate::output::{write_file, Manifest};

/// The two transceivers built on one channel.
#[derive(Debug, Clone)]
pub struct PlanPair {
    pub channel_seed: u64,
    pub equivalent: EquivalentChannel,
    pub gam: SubchannelPlan,
    pub qr_sic: SubchannelPlan,
}

impl PlanPair {
    /// GAM total order over QR-SIC total order (bits per channel use).
    pub fn rate_ratio(&self) -> f64 {
        self.gam.total_bits() / self.qr_sic.total_bits()
    }
}

/// Seed of the pinned channel in single mode.
pub fn pinned_channel_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.channel_seed.unwrap_or_else(|| derive_seed(cfg.seed, &[0xc4a7]))
}

/// Seed of channel realization `r` in averaged mode.
pub fn realization_seed(cfg: &ExperimentConfig, r: usize) -> u64 {
    derive_seed(cfg.seed, &[2, r as u64])
}

/// Draws the channel for `channel_seed` and plans GAM (CP) and QR-SIC (QR)
/// at the configured design SNR and received MED.
pub fn plan_pair(cfg: &ExperimentConfig, corr: &CorrelationMatrix, channel_seed: u64) -> Result<PlanPair> {
    let ch = sample_channel(&cfg.grid, &cfg.attenuation, cfg.n_r, corr, channel_seed)?;
    let equivalent = reduce_to_equivalent(&ch, cfg.rank_tolerance)?;
    let med = cfg.med_policy.received_med()?;
    let snr = cfg.design_snr();
    let gam = plan_subchannels(&cp_decompose(&equivalent)?, snr, med)?;
    let qr_sic = plan_subchannels(&qr_decompose(&equivalent)?, snr, med)?;
    Ok(PlanPair { channel_seed, equivalent, gam, qr_sic })
}

/// Frame seed for SNR point `si` of `scheme` (0 = GAM, 1 = QR-SIC).
fn frame_seed(channel_seed: u64, si: usize, scheme: u64) -> u64 {
    derive_seed(channel_seed, &[si as u64, scheme])
}

fn sweep(cfg: &ExperimentConfig, plan: &SubchannelPlan, channel_seed: u64, scheme: u64) -> Vec<SerReport> {
    cfg.snr_db
        .iter()
        .enumerate()
        .map(|(si, &snr_db)| {
            let sc = SerConfig { snr_db, frames: cfg.frames, seed: frame_seed(channel_seed, si, scheme), noise: Noise::On };
            monte_carlo_ser(plan, &sc)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SerOutcome {
    pub mode: SerMode,
    pub channel_seeds: Vec<u64>,
    pub gam_csv: String,
    pub qr_sic_csv: String,
    /// Mean total bits per channel use over realizations.
    pub gam_bits: f64,
    pub qr_sic_bits: f64,
    /// Full per-SNR reports in single mode.
    pub gam_reports: Vec<SerReport>,
    pub qr_sic_reports: Vec<SerReport>,
}

pub fn run_ser(cfg: &ExperimentConfig) -> Result<SerOutcome> {
    let corr = build_correlation_matrix(&cfg.grid)?;
    match cfg.mode {
        SerMode::Single => {
            let pair = plan_pair(cfg, &corr, pinned_channel_seed(cfg))?;
            let gam_reports = sweep(cfg, &pair.gam, pair.channel_seed, 0);
            let qr_sic_reports = sweep(cfg, &pair.qr_sic, pair.channel_seed, 1);
            Ok(SerOutcome {
                mode: cfg.mode,
                channel_seeds: vec![pair.channel_seed],
                gam_csv: ser_csv(&gam_reports),
                qr_sic_csv: ser_csv(&qr_sic_reports),
                gam_bits: pair.gam.total_bits(),
                qr_sic_bits: pair.qr_sic.total_bits(),
                gam_reports,
                qr_sic_reports,
            })
        }
        SerMode::Averaged => {
            let seeds: Vec<u64> = (0..cfg.realizations).map(|r| realization_seed(cfg, r)).collect();
            let runs = seeds
                .par_iter()
                .map(|&seed| -> Result<(Vec<SerReport>, Vec<SerReport>)> {
                    let pair = plan_pair(cfg, &corr, seed)?;
                    Ok((sweep(cfg, &pair.gam, seed, 0), sweep(cfg, &pair.qr_sic, seed, 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            let (gam, qr): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
            let mean_bits = |all: &[Vec<SerReport>]| all.iter().map(|r| r[0].total_bits).sum::<f64>() / all.len() as f64;
            Ok(SerOutcome {
                mode: cfg.mode,
                channel_seeds: seeds,
                gam_csv: pooled_csv(&cfg.snr_db, &gam, "gam"),
                qr_sic_csv: pooled_csv(&cfg.snr_db, &qr, "qr-sic"),
                gam_bits: mean_bits(&gam),
                qr_sic_bits: mean_bits(&qr),
                gam_reports: vec![],
                qr_sic_reports: vec![],
            })
        }
    }
}

/// Pools realizations: counts are summed, cardinality, order, theory and
/// MED are averaged, and the mode column reads `mixed` when realizations
/// disagree.
fn pooled_csv(snr_db: &[f64], runs: &[Vec<SerReport>], scheme: &str) -> String {
    let mut out = String::from(SER_CSV_HEADER);
    out.push('\n');
    let subs = runs.iter().map(|r| r[0].subchannels.len()).max().unwrap_or(0);
    for (si, snr) in snr_db.iter().enumerate() {
        let (mut all_trials, mut all_errors) = (0u64, 0u64);
        let mut theory_sum = 0.0;
        let mut theory_count = 0usize;
        let mut med_min = f64::INFINITY;
        for k in 0..subs {
            let stats: Vec<_> = runs.iter().filter_map(|r| r[si].subchannels.get(k)).collect();
            let count = stats.len() as f64;
            let trials: u64 = stats.iter().map(|s| s.trials).sum();
            let errors: u64 = stats.iter().map(|s| s.errors).sum();
            let first = stats.first().map(|s| s.mode);
            let mode = if stats.iter().all(|s| Some(s.mode) == first) { first.map_or("fixed", |m| m.name()) } else { "mixed" };
            let mean = |f: &dyn Fn(&gam_core::xcvr::SubchannelStats) -> f64| stats.iter().map(|s| f(s)).sum::<f64>() / count;
            let theory = mean(&|s| s.ser_theory);
            let finite_meds: Vec<f64> = stats.iter().map(|s| s.med_received).filter(|m| m.is_finite()).collect();
            let med = if finite_meds.is_empty() { f64::INFINITY } else { finite_meds.iter().sum::<f64>() / finite_meds.len() as f64 };
            let _ = writeln!(
                out,
                "{snr},{},{mode},{:.2},{:.6},{trials},{errors},{:.6e},{:.6e},{}",
                k + 1,
                mean(&|s| s.cardinality as f64),
                mean(&|s| s.bits),
                if trials > 0 { errors as f64 / trials as f64 } else { 0.0 },
                theory,
                fmt_med(med),
            );
            let active: Vec<_> = stats.iter().filter(|s| s.mode != Mode::Fixed).collect();
            all_trials += active.iter().map(|s| s.trials).sum::<u64>();
            all_errors += errors;
            theory_sum += active.iter().map(|s| s.ser_theory).sum::<f64>();
            theory_count += active.len();
            med_min = med_min.min(med);
        }
        let bits = runs.iter().map(|r| r[si].total_bits).sum::<f64>() / runs.len() as f64;
        let _ = writeln!(
            out,
            "{snr},aggregate,{scheme},,{bits:.6},{all_trials},{all_errors},{:.6e},{:.6e},{}",
            if all_trials > 0 { all_errors as f64 / all_trials as f64 } else { 0.0 },
            if theory_count > 0 { theory_sum / theory_count as f64 } else { 0.0 },
            fmt_med(med_min),
        );
    }
    out
}

fn fmt_med(m: f64) -> String {
    if m.is_finite() {
        format!("{m:.6e}")
    } else {
        "inf".to_string()
    }
}

/// Runs the sweep and writes `ser_gam.csv`, `ser_qrsic.csv` and the
/// manifest.
pub fn ser_sim(cfg: &ExperimentConfig) -> Result<SerOutcome> {
    let outcome = run_ser(cfg)?;
    write_file(&cfg.out_dir, "ser_gam.csv", &outcome.gam_csv)?;
    write_file(&cfg.out_dir, "ser_qrsic.csv", &outcome.qr_sic_csv)?;
    let files = vec!["ser_gam.csv".to_string(), "ser_qrsic.csv".to_string()];
    Manifest::new("ser-sim", cfg, outcome.channel_seeds.clone(), files).write(&cfg.out_dir)?;
    Ok(outcome)
}
