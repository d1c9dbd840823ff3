//! Phase-modulated transceiver: subchannel planning, modulation, the AWGN
//! link, successive interference cancellation and SER references.
//!
//! All constellations live in the transmit domain (units of `C`); the
//! receiver sees them scaled by `√snr`. Row `r` of `C` owns the columns
//! `pivots[r]..pivots[r+1]` of the permuted order: two columns make an
//! annular (GAM) subchannel, one column a PSK circle. The last row is the
//! beamforming row; its phases are fixed so that every term adds coherently.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt::Write as _;
use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::echelon::{EchelonDecomposition, Method};
use crate::error::input_error;
use crate::hexlat::{annulus_from_pair, build_psk, decompose_point, enumerate_annulus, wrap_phase, AnnularConstellation, PskConstellation};
use crate::rng::{complex_normal, stream};
use crate::{Result, C64};

/// Default target for the theoretical annular SER when choosing the
/// received MED.
pub const DEFAULT_TARGET_SER: f64 = 1e-3;

/// Frames per independent random stream in [`monte_carlo_ser`].
pub const FRAMES_PER_BLOCK: u64 = 4096;

/// Gaussian tail `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Nearest-neighbour union bound for the hexagonal lattice, `6·Q(d/√2)`,
/// clamped to 1.
pub fn ser_union_bound_annular(med_received: f64) -> f64 {
    (6.0 * q_function(med_received / SQRT_2)).clamp(0.0, 1.0)
}

/// Received MED whose annular union bound equals `target_ser`.
pub fn med_for_target_ser(target_ser: f64) -> Result<f64> {
    if !(target_ser > 0.0 && target_ser < 1.0) {
        return Err(input_error(format!("target SER must lie in (0, 1), got {target_ser}")));
    }
    let (mut lo, mut hi) = (0.0_f64, 80.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ser_union_bound_annular(mid) > target_ser {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exact M-PSK symbol error probability,
/// `(1/π)∫₀^{π−π/M} exp(−γ·sin²(π/M)/sin²θ) dθ` with `γ = snr·radius²`.
pub fn ser_psk_reference(order: usize, radius: f64, snr_linear: f64) -> Result<f64> {
    if order < 2 {
        return Err(input_error(format!("PSK order must be at least 2, got {order}")));
    }
    if !(radius >= 0.0 && snr_linear >= 0.0) {
        return Err(input_error("PSK radius and SNR must be nonnegative"));
    }
    let gamma = snr_linear * radius * radius;
    let s = (PI / order as f64).sin().powi(2);
    let f = |theta: f64| {
        let st = theta.sin();
        if st <= 0.0 {
            if gamma == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (-gamma * s / (st * st)).exp()
        }
    };
    let upper = PI - PI / order as f64;
    let mut p = adaptive_simpson(&f, 0.0, upper, 1e-10 * PI) / PI;
    // deep tails need a relative tolerance as well
    if p < 1e-4 && p > 0.0 {
        p = adaptive_simpson(&f, 0.0, upper, (1e-8 * p * PI).max(f64::MIN_POSITIVE)) / PI;
    }
    Ok(p.clamp(0.0, 1.0))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol || delta.abs() <= 1e-13 * (left + right).abs() {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}

/// Degrees of freedom of GAM, QR-SIC and the upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofSummary {
    pub dof_gam: f64,
    pub dof_qr_sic: f64,
    pub dof_max: f64,
}

pub fn dof_summary(n_check: usize, tau: usize) -> Result<DofSummary> {
    if tau < 1 || tau > n_check {
        return Err(input_error(format!("need 1 <= tau <= n_check, got tau = {tau}, n_check = {n_check}")));
    }
    let (n, t) = (n_check as f64, tau as f64);
    let half = (n + 1.0) / 2.0;
    let dof_gam = if n_check + 1 >= 2 * tau { t } else { half };
    Ok(DofSummary { dof_gam, dof_qr_sic: 1.0 + (t - 1.0) / 2.0, dof_max: t.min(half) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Annular,
    Circle,
    /// Rate-zero subchannel carrying one known point.
    Fixed,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Annular => "annular",
            Mode::Circle => "circle",
            Mode::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Modulation {
    Annular(AnnularConstellation),
    Circle(PskConstellation),
    Fixed(C64),
}

/// One phase-modulated row of `C`.
#[derive(Debug, Clone)]
pub struct Subchannel {
    pub row: usize,
    /// Positions in the permuted column order.
    pub columns: Range<usize>,
    pub coefficients: Vec<C64>,
    pub modulation: Modulation,
    /// `points[m]`: transmit-domain value of symbol `m`.
    points: Vec<C64>,
    /// `phasors[m][k] = e^{jθ_k}` for the row's own columns.
    phasors: Vec<[C64; 2]>,
    phases: Vec<[f64; 2]>,
}

impl Subchannel {
    pub fn mode(&self) -> Mode {
        match self.modulation {
            Modulation::Annular(_) => Mode::Annular,
            Modulation::Circle(_) => Mode::Circle,
            Modulation::Fixed(_) => Mode::Fixed,
        }
    }

    pub fn cardinality(&self) -> usize {
        self.points.len()
    }

    pub fn bits(&self) -> f64 {
        (self.cardinality() as f64).log2()
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    /// Transmit-domain minimum distance (infinite for a single point).
    pub fn med(&self) -> f64 {
        match &self.modulation {
            Modulation::Annular(a) => a.med,
            Modulation::Circle(p) => p.med(),
            Modulation::Fixed(_) => f64::INFINITY,
        }
    }

    /// Phases of the row's own columns for symbol `m`.
    pub fn symbol_phases(&self, m: usize) -> &[f64] {
        &self.phases[m][..self.columns.len()]
    }

    fn decide(&self, s: C64) -> usize {
        match &self.modulation {
            Modulation::Annular(a) => a.nearest(s),
            Modulation::Circle(p) => {
                let lead = self.coefficients.iter().copied().find(|z| z.norm() > 0.0).unwrap_or(C64::new(1.0, 0.0));
                p.nearest(s * unit_conj(lead))
            }
            Modulation::Fixed(_) => 0,
        }
    }

    fn theory(&self, snr: f64) -> f64 {
        match &self.modulation {
            Modulation::Annular(a) if a.len() > 1 => ser_union_bound_annular(snr.sqrt() * a.med),
            Modulation::Circle(p) => ser_psk_reference(p.order, p.radius, snr).unwrap_or(1.0),
            _ => 0.0,
        }
    }
}

fn unit_conj(c: C64) -> C64 {
    let r = c.norm();
    if r > 0.0 {
        c.conj() / r
    } else {
        C64::new(1.0, 0.0)
    }
}

/// Complete transmit/receive configuration for one decomposition.
#[derive(Debug, Clone)]
pub struct SubchannelPlan {
    pub decomposition: EchelonDecomposition,
    pub snr_db: f64,
    /// Received-domain MED target.
    pub med_target: f64,
    /// Transmit-domain lattice scale `med_target/√snr`.
    pub eta: f64,
    pub subchannels: Vec<Subchannel>,
    /// First permuted column of the beamforming row.
    pub beam_start: usize,
    /// Fixed phases `−∠c_{τk}` for permuted columns `beam_start..ň`.
    pub beam_phases: Vec<f64>,
    /// `Σ_k |c_{τk}|` over the beamforming columns.
    pub beam_gain: f64,
    /// Per row `r`: `Σ_{k ≥ beam_start} c_{rk}·e^{jθ_k}`.
    beam_terms: Vec<C64>,
}

impl SubchannelPlan {
    pub fn tau(&self) -> usize {
        self.decomposition.tau()
    }

    pub fn n_check(&self) -> usize {
        self.decomposition.n_check()
    }

    pub fn total_bits(&self) -> f64 {
        self.subchannels.iter().map(Subchannel::bits).sum()
    }

    pub fn count_mode(&self, mode: Mode) -> usize {
        self.subchannels.iter().filter(|s| s.mode() == mode).count()
    }

    /// Product of subchannel cardinalities; `None` on overflow.
    pub fn cardinality_product(&self) -> Option<u128> {
        self.subchannels.iter().try_fold(1u128, |acc, s| acc.checked_mul(s.cardinality() as u128))
    }

    pub fn beam_term(&self, row: usize) -> C64 {
        self.beam_terms[row]
    }
}

/// Plans subchannels from the pivot pattern of `dec`.
///
/// Annular rows use `η = med_target/√snr`. Circle rows use the largest PSK
/// order whose MED reaches the same target. A row whose constellation would
/// hold fewer than two points at that spacing becomes a rate-zero fixed
/// point.
pub fn plan_subchannels(dec: &EchelonDecomposition, snr_db: f64, med_target: f64) -> Result<SubchannelPlan> {
    if !(med_target.is_finite() && med_target > 0.0) {
        return Err(input_error(format!("MED target must be positive, got {med_target}")));
    }
    if !snr_db.is_finite() {
        return Err(input_error("SNR must be finite"));
    }
    let (tau, n) = (dec.tau(), dec.n_check());
    if dec.pivots.len() != tau {
        return Err(input_error("decomposition pivots do not match its row count"));
    }
    let snr = db_to_linear(snr_db);
    let eta = med_target / snr.sqrt();
    let c = &dec.coefficients;

    let span = |r: usize| {
        let start = dec.pivots[r].min(n);
        let end = dec.pivots.get(r + 1).map_or(n, |&p| p.min(n)).max(start);
        start..end
    };
    let beam_cols = span(tau - 1);
    let beam_phases: Vec<f64> = beam_cols.clone().map(|k| wrap_phase(-c[(tau - 1, k)].arg())).collect();
    let beam_gain: f64 = beam_cols.clone().map(|k| c[(tau - 1, k)].norm()).sum();
    let beam_phasors: Vec<C64> = beam_phases.iter().map(|&t| C64::from_polar(1.0, t)).collect();
    let beam_terms = (0..tau)
        .map(|r| beam_cols.clone().zip(&beam_phasors).map(|(k, e)| c[(r, k)] * e).sum())
        .collect();

    let mut subchannels = Vec::with_capacity(tau.saturating_sub(1));
    for r in 0..tau.saturating_sub(1) {
        let cols = span(r);
        if cols.len() > 2 {
            return Err(input_error(format!("row {r} owns {} columns; at most two are supported", cols.len())));
        }
        let coefficients: Vec<C64> = cols.clone().map(|k| c[(r, k)]).collect();
        subchannels.push(build_subchannel(r, cols, coefficients, eta)?);
    }
    Ok(SubchannelPlan {
        decomposition: dec.clone(),
        snr_db,
        med_target,
        eta,
        subchannels,
        beam_start: beam_cols.start,
        beam_phases,
        beam_gain,
        beam_terms,
    })
}

fn build_subchannel(row: usize, columns: Range<usize>, coefficients: Vec<C64>, eta: f64) -> Result<Subchannel> {
    let zero = C64::default();
    let (c1, c2) = (coefficients.first().copied().unwrap_or(zero), coefficients.get(1).copied().unwrap_or(zero));
    let mut sub = Subchannel { row, columns, coefficients, modulation: Modulation::Fixed(c1 + c2), points: vec![], phasors: vec![], phases: vec![] };

    if c1.norm() > 0.0 && c2.norm() > 0.0 {
        let constellation = enumerate_annulus(&annulus_from_pair(c1, c2)?, eta)?;
        if constellation.len() >= 2 {
            for s in constellation.values() {
                let pp = decompose_point(s, c1, c2)?;
                sub.phases.push([pp.theta1, pp.theta2]);
            }
            sub.points = constellation.values().collect();
            sub.modulation = Modulation::Annular(constellation);
        }
    } else if let Some(&lead) = [c1, c2].iter().find(|z| z.norm() > 0.0) {
        let psk = build_psk(lead.norm(), eta)?;
        if !psk.med_deficient {
            // symbol m is received at ∠lead + 2πm/M
            for p in &psk.points {
                let theta = wrap_phase(p.arg());
                let pair = if c1.norm() > 0.0 { [theta, 0.0] } else { [0.0, theta] };
                sub.phases.push(pair);
            }
            sub.points = psk.points.iter().map(|p| p * C64::from_polar(1.0, lead.arg())).collect();
            sub.modulation = Modulation::Circle(psk);
        }
    }
    if sub.points.is_empty() {
        sub.modulation = Modulation::Fixed(c1 + c2);
        sub.points = vec![c1 + c2];
        sub.phases = vec![[0.0, 0.0]];
    }
    sub.phasors = sub.phases.iter().map(|p| [C64::from_polar(1.0, p[0]), C64::from_polar(1.0, p[1])]).collect();
    Ok(sub)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Symbols and the resulting RIS phase vector for one channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    /// One index per phase-modulated subchannel.
    pub indices: Vec<usize>,
    /// `θ̌` in the original column order of `Ȟ`, wrapped to `[0, 2π)`.
    pub phases: Vec<f64>,
    /// Active input, `|x̌| = 1`.
    pub x: C64,
}

impl SymbolFrame {
    /// Phases in the permuted order of `C`.
    pub fn permuted_phases(&self, plan: &SubchannelPlan) -> Vec<f64> {
        plan.decomposition.permutation.iter().map(|&j| self.phases[j]).collect()
    }
}

pub fn modulate(plan: &SubchannelPlan, indices: &[usize]) -> Result<SymbolFrame> {
    if indices.len() != plan.subchannels.len() {
        return Err(input_error(format!("expected {} symbol indices, got {}", plan.subchannels.len(), indices.len())));
    }
    let perm = &plan.decomposition.permutation;
    let mut phases = vec![0.0; plan.n_check()];
    for (sub, &m) in plan.subchannels.iter().zip(indices) {
        if m >= sub.cardinality() {
            return Err(input_error(format!("symbol {m} out of range for subchannel {} of size {}", sub.row, sub.cardinality())));
        }
        for (k, &theta) in sub.columns.clone().zip(sub.symbol_phases(m)) {
            phases[perm[k]] = theta;
        }
    }
    for (k, &theta) in (plan.beam_start..plan.n_check()).zip(&plan.beam_phases) {
        phases[perm[k]] = theta;
    }
    Ok(SymbolFrame { indices: indices.to_vec(), phases, x: C64::new(1.0, 0.0) })
}

/// Noise switch for the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    #[default]
    On,
    Off,
}

/// Channel output before and after the receiver rotation.
#[derive(Debug, Clone)]
pub struct LinkOutput {
    /// `y̌ = √snr·Ȟ·e^{jθ̌}·x̌ + ž`.
    pub y: Vec<C64>,
    /// `ỹ = Bᴴ·y̌`.
    pub y_rotated: Vec<C64>,
}

/// Equivalent-model link. `Ȟ` is recovered as `B·C·Pᴴ`; noise is standard
/// complex Gaussian drawn in the `τ`-dimensional reduced domain.
pub fn transmit_and_receive(plan: &SubchannelPlan, frame: &SymbolFrame, snr_db: f64, seed: u64, noise: Noise) -> LinkOutput {
    let dec = &plan.decomposition;
    let h = dec.reconstruct();
    let amp = db_to_linear(snr_db).sqrt();
    let e: Vec<C64> = frame.phases.iter().map(|&t| C64::from_polar(1.0, t) * frame.x).collect();
    let mut rng = crate::rng::seeded(seed);
    let y: Vec<C64> = (0..h.nrows())
        .map(|i| {
            let signal: C64 = (0..h.ncols()).map(|j| h[(i, j)] * e[j]).sum();
            let z = if noise == Noise::On { complex_normal(&mut rng) } else { C64::default() };
            signal * amp + z
        })
        .collect();
    let b = &dec.rotation;
    let y_rotated = (0..b.ncols()).map(|r| (0..b.nrows()).map(|i| b[(i, r)].conj() * y[i]).sum()).collect();
    LinkOutput { y, y_rotated }
}

/// Bottom-to-top SIC over the phase-modulated rows. Terms of already
/// decided rows and the known beamforming term are subtracted; leakage from
/// columns left of a row's pivot stays as interference.
pub fn sic_demodulate(plan: &SubchannelPlan, received: &[C64], snr_db: f64) -> Vec<usize> {
    let amp = db_to_linear(snr_db).sqrt();
    let mut decided = vec![0usize; plan.subchannels.len()];
    sic_core(plan, received, amp, &mut decided);
    decided
}

fn sic_core(plan: &SubchannelPlan, received: &[C64], amp: f64, decided: &mut [usize]) {
    let c = &plan.decomposition.coefficients;
    for (r, sub) in plan.subchannels.iter().enumerate().rev() {
        let mut known = plan.beam_terms[r];
        for (lower, &m) in plan.subchannels[r + 1..].iter().zip(&decided[r + 1..]) {
            for (k, e) in lower.columns.clone().zip(plan_phasors(lower, m)) {
                known += c[(r, k)] * e;
            }
        }
        let s = received[r] / amp - known;
        decided[r] = sub.decide(s);
    }
}

fn plan_phasors(sub: &Subchannel, m: usize) -> impl Iterator<Item = C64> + '_ {
    sub.phasors[m].iter().copied().take(sub.columns.len())
}

/// Monte Carlo settings for one SNR point.
#[derive(Debug, Clone, Copy)]
pub struct SerConfig {
    pub snr_db: f64,
    pub frames: u64,
    pub seed: u64,
    pub noise: Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubchannelStats {
    pub row: usize,
    pub mode: Mode,
    pub cardinality: usize,
    pub bits: f64,
    pub trials: u64,
    pub errors: u64,
    pub ser_empirical: f64,
    pub ser_theory: f64,
    /// Received-domain MED, `√snr·MED`.
    pub med_received: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerReport {
    pub scheme: String,
    pub snr_db: f64,
    pub seed: u64,
    pub frames: u64,
    pub subchannels: Vec<SubchannelStats>,
    pub total_bits: f64,
    /// Product of cardinalities, when it fits.
    pub cardinality_product: Option<u128>,
}

impl SerReport {
    pub fn total_trials(&self) -> u64 {
        self.subchannels.iter().filter(|s| s.mode != Mode::Fixed).map(|s| s.trials).sum()
    }

    pub fn total_errors(&self) -> u64 {
        self.subchannels.iter().map(|s| s.errors).sum()
    }
}

/// Label used in reports: GAM unless every row is a single-column circle
/// (the QR-SIC layout).
pub fn scheme_name(plan: &SubchannelPlan) -> &'static str {
    if plan.decomposition.method == Method::Qr {
        "qr-sic"
    } else {
        "gam"
    }
}

/// Symbol error counts over `frames` random frames at `cfg.snr_db`.
///
/// Frames are grouped in blocks of [`FRAMES_PER_BLOCK`]; block `b` draws from
/// `stream(seed, b)`, symbols first and then `τ` noise samples per frame.
/// Counts are integers, so the result does not depend on scheduling.
pub fn monte_carlo_ser(plan: &SubchannelPlan, cfg: &SerConfig) -> SerReport {
    let snr = db_to_linear(cfg.snr_db);
    let amp = snr.sqrt();
    let tau = plan.tau();
    let subs = &plan.subchannels;
    let c = &plan.decomposition.coefficients;
    let b = &plan.decomposition.rotation;
    let blocks = cfg.frames.div_ceil(FRAMES_PER_BLOCK);

    let counts = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = stream(cfg.seed, block);
            let frames = FRAMES_PER_BLOCK.min(cfg.frames - block * FRAMES_PER_BLOCK);
            let mut errors = vec![0u64; subs.len()];
            let mut sent = vec![0usize; subs.len()];
            let mut decided = vec![0usize; subs.len()];
            let mut z = vec![C64::default(); tau];
            let mut y = vec![C64::default(); tau];
            for _ in 0..frames {
                for (m, sub) in sent.iter_mut().zip(subs) {
                    *m = if sub.cardinality() > 1 { rng.random_range(0..sub.cardinality()) } else { 0 };
                }
                for zi in z.iter_mut() {
                    *zi = if cfg.noise == Noise::On { complex_normal(&mut rng) } else { C64::default() };
                }
                for (r, yr) in y.iter_mut().enumerate() {
                    let mut s = plan.beam_terms[r];
                    for (sub, &m) in subs.iter().zip(&sent) {
                        for (k, e) in sub.columns.clone().zip(plan_phasors(sub, m)) {
                            s += c[(r, k)] * e;
                        }
                    }
                    // Bᴴž keeps the link identical to `transmit_and_receive`
                    let zr: C64 = (0..tau).map(|i| b[(i, r)].conj() * z[i]).sum();
                    *yr = s * amp + zr;
                }
                sic_core(plan, &y, amp, &mut decided);
                for ((e, &tx), &rx) in errors.iter_mut().zip(&sent).zip(&decided) {
                    *e += u64::from(tx != rx);
                }
            }
            errors
        })
        .reduce(|| vec![0u64; subs.len()], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());

    let subchannels = subs
        .iter()
        .zip(&counts)
        .map(|(sub, &errors)| SubchannelStats {
            row: sub.row,
            mode: sub.mode(),
            cardinality: sub.cardinality(),
            bits: sub.bits(),
            trials: cfg.frames,
            errors,
            ser_empirical: if cfg.frames > 0 { errors as f64 / cfg.frames as f64 } else { 0.0 },
            ser_theory: sub.theory(snr),
            med_received: amp * sub.med(),
        })
        .collect();
    SerReport {
        scheme: scheme_name(plan).to_string(),
        snr_db: cfg.snr_db,
        seed: cfg.seed,
        frames: cfg.frames,
        subchannels,
        total_bits: plan.total_bits(),
        cardinality_product: plan.cardinality_product(),
    }
}

pub const SER_CSV_HEADER: &str = "snr_db,subchannel,mode,cardinality,mod_order_bits,trials,errors,ser_empirical,ser_theory,med_received";

/// SER table: one row per (SNR, subchannel) and one `aggregate` row per SNR.
/// Subchannels are numbered from 1. The aggregate row reports the product
/// of cardinalities, the total order in bits, pooled counts over
/// non-fixed subchannels, the mean theoretical SER and the smallest MED.
pub fn ser_csv(reports: &[SerReport]) -> String {
    let mut out = String::from(SER_CSV_HEADER);
    out.push('\n');
    for rep in reports {
        for s in &rep.subchannels {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{},{},{:.6e},{:.6e},{}",
                rep.snr_db,
                s.row + 1,
                s.mode.name(),
                s.cardinality,
                s.bits,
                s.trials,
                s.errors,
                s.ser_empirical,
                s.ser_theory,
                fmt_med(s.med_received),
            );
        }
        let active: Vec<&SubchannelStats> = rep.subchannels.iter().filter(|s| s.mode != Mode::Fixed).collect();
        let trials = rep.total_trials();
        let errors = rep.total_errors();
        let ser = if trials > 0 { errors as f64 / trials as f64 } else { 0.0 };
        let theory = if active.is_empty() { 0.0 } else { active.iter().map(|s| s.ser_theory).sum::<f64>() / active.len() as f64 };
        let med = rep.subchannels.iter().map(|s| s.med_received).fold(f64::INFINITY, f64::min);
        let product = rep.cardinality_product.map(|p| p.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},aggregate,{},{},{:.6},{},{},{:.6e},{:.6e},{}",
            rep.snr_db,
            rep.scheme,
            product,
            rep.total_bits,
            trials,
            errors,
            ser,
            theory,
            fmt_med(med),
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
