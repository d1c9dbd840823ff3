//! Per-subchannel constellation dumps for one pinned channel.

use std::fmt::Write as _;

use gam_core::corrchan::build_correlation_matrix;
use gam_core::xcvr::{db_to_linear, Modulation, Subchannel, SubchannelPlan};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{write_file, Manifest};
use crate::ser::{pinned_channel_seed, plan_pair, PlanPair};

/// Points of a subchannel as CSV. Annular constellations keep their
/// lattice coordinates (`k,z1,z2,re,im,modulus`); circle and fixed rows use
/// `m,re,im,modulus`. Values are in the transmit domain.
pub fn subchannel_csv(sub: &Subchannel) -> String {
    match &sub.modulation {
        Modulation::Annular(a) => a.to_csv(),
        Modulation::Circle(_) | Modulation::Fixed(_) => {
            let mut out = String::from("m,re,im,modulus\n");
            for (m, p) in sub.points().iter().enumerate() {
                let _ = writeln!(out, "{m},{:.17e},{:.17e},{:.17e}", p.re, p.im, p.norm());
            }
            out
        }
    }
}

pub const SUMMARY_HEADER: &str = "scheme,subchannel,mode,cardinality,mod_order_bits,med_received";

/// Table of cardinalities and orders, with a `total` row per scheme that
/// holds the cardinality product and the summed order.
pub fn summary_csv(plans: &[(&str, &SubchannelPlan)]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for (scheme, plan) in plans {
        let amp = db_to_linear(plan.snr_db).sqrt();
        for (i, sub) in plan.subchannels.iter().enumerate() {
            let med = amp * sub.med();
            let med = if med.is_finite() { format!("{med:.6e}") } else { "inf".into() };
            let _ = writeln!(out, "{scheme},{},{},{},{:.6},{med}", i + 1, sub.mode().name(), sub.cardinality(), sub.bits());
        }
        let product = plan.cardinality_product().map(|p| p.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{scheme},total,,{product},{:.6},", plan.total_bits());
    }
    out
}

/// Writes one CSV per subchannel and scheme, `constellation_summary.csv`
/// and the manifest.
pub fn constellation_dump(cfg: &ExperimentConfig) -> Result<PlanPair> {
    let corr = build_correlation_matrix(&cfg.grid)?;
    let pair = plan_pair(cfg, &corr, pinned_channel_seed(cfg))?;
    let mut files = Vec::new();
    for (scheme, plan) in [("gam", &pair.gam), ("qrsic", &pair.qr_sic)] {
        for (i, sub) in plan.subchannels.iter().enumerate() {
            let name = format!("constellation_{scheme}_{}.csv", i + 1);
            write_file(&cfg.out_dir, &name, &subchannel_csv(sub))?;
            files.push(name);
        }
    }
    write_file(&cfg.out_dir, "constellation_summary.csv", &summary_csv(&[("gam", &pair.gam), ("qr-sic", &pair.qr_sic)]))?;
    files.push("constellation_summary.csv".into());
    Manifest::new("constellation-dump", cfg, vec![pair.channel_seed], files).write(&cfg.out_dir)?;
    Ok(pair)
}
