//! Hexagonal-lattice constellations on annuli.
//!
//! The lattice is `H = {z₁ + z₂·e^{jπ/3} : z₁, z₂ ∈ ℤ}` with squared norm
//! `z₁² + z₁z₂ + z₂²`. An annular constellation is `A ∩ ηH` for the closed
//! annulus `A = {s : r_in ≤ |s| ≤ r_out}`; its points are enumerated shell by
//! shell, using the theta-series coefficient `N_hex(k)` to skip empty shells.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_3, PI, TAU};
use std::fmt::Write as _;

use crate::error::input_error;
use crate::{Error, Result, C64};

/// Relative slack applied when deciding whether a lattice shell touches the
/// annulus boundary.
pub const BOUNDARY_EPS: f64 = 1e-12;

/// Largest `m` accepted by [`signed_min_magnitude`].
pub const MAX_SIGN_SEARCH: usize = 30;

/// Upper bound on the shell index scanned by [`scale_for_cardinality`].
pub const MAX_SHELL: u64 = 1 << 26;

/// Largest PSK order [`build_psk`] will produce.
pub const MAX_PSK_ORDER: usize = 1 << 20;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// `e^{jπ/3}`.
pub fn lattice_generator() -> C64 {
    C64::from_polar(1.0, FRAC_PI_3)
}

/// `z₁ + z₂·e^{jπ/3}`.
pub fn lattice_point(z1: i64, z2: i64) -> C64 {
    C64::new(z1 as f64 + 0.5 * z2 as f64, SQRT3_2 * z2 as f64)
}

/// `r_min` and `r_max` of the signed sum `|Σ ε_i |p_i||` over `ε ∈ {±1}^m`.
///
/// Exhaustive over `2^{m-1}` patterns; the sign of `p_1` is fixed by the
/// global symmetry.
pub fn signed_min_magnitude(p: &[C64]) -> Result<(f64, f64)> {
    let m = p.len();
    if m == 0 {
        return Err(input_error("need at least one coefficient"));
    }
    if m > MAX_SIGN_SEARCH {
        return Err(Error::Size { size: m, limit: MAX_SIGN_SEARCH });
    }
    let mags: Vec<f64> = p.iter().map(|z| z.norm()).collect();
    let r_max = mags.iter().sum();
    let mut r_min = f64::INFINITY;
    for mask in 0u64..(1u64 << (m - 1)) {
        let s = mags[0]
            + mags[1..]
                .iter()
                .enumerate()
                .map(|(i, &v)| if mask >> i & 1 == 1 { -v } else { v })
                .sum::<f64>();
        r_min = r_min.min(s.abs());
    }
    Ok((r_min, r_max))
}

/// Feasible set of `c1·e^{jθ₁} + c2·e^{jθ₂}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annulus {
    pub r_in: f64,
    pub r_out: f64,
    pub c1: C64,
    pub c2: C64,
}

impl Annulus {
    pub fn contains(&self, s: C64, tol: f64) -> bool {
        let r = s.norm();
        r >= self.r_in - tol && r <= self.r_out + tol
    }

    pub fn area(&self) -> f64 {
        PI * (self.r_out * self.r_out - self.r_in * self.r_in)
    }
}

pub fn annulus_from_pair(c1: C64, c2: C64) -> Result<Annulus> {
    let (a, b) = (c1.norm(), c2.norm());
    if !(a.is_finite() && b.is_finite()) {
        return Err(input_error("annulus coefficients must be finite"));
    }
    if a == 0.0 && b == 0.0 {
        return Err(input_error("annulus coefficients are both zero"));
    }
    Ok(Annulus { r_in: (a - b).abs(), r_out: a + b, c1, c2 })
}

/// Number of hexagonal lattice points of squared norm `k` (the `q^k`
/// coefficient of the theta series).
pub fn hex_count(k: u64) -> u64 {
    if k == 0 {
        return 1;
    }
    let mut rest = k;
    let mut product = 1u64;
    let mut p = 2u64;
    while p * p <= rest {
        if rest.is_multiple_of(p) {
            let mut nu = 0u64;
            while rest.is_multiple_of(p) {
                rest /= p;
                nu += 1;
            }
            product *= prime_factor_weight(p, nu);
            if product == 0 {
                return 0;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if rest > 1 {
        product *= prime_factor_weight(rest, 1);
    }
    6 * product
}

fn prime_factor_weight(p: u64, nu: u64) -> u64 {
    match p % 3 {
        0 => 1,
        1 => nu + 1,
        _ => u64::from(nu.is_multiple_of(2)),
    }
}

/// Brute-force count of integer pairs with `z₁² + z₁z₂ + z₂² = k`. Reference
/// for [`hex_count`].
pub fn hex_count_oracle(k: u64) -> u64 {
    // |z| ≥ (√3/2)·max(|z₁|, |z₂|), so the box radius 2√(k/3) suffices
    let bound = (2.0 * (k as f64 / 3.0).sqrt()).ceil() as i64 + 1;
    let k = k as i64;
    let mut count = 0;
    for z1 in -bound..=bound {
        for z2 in -bound..=bound {
            if z1 * z1 + z1 * z2 + z2 * z2 == k {
                count += 1;
            }
        }
    }
    count
}

/// All integer solutions of `z₁² + z₁z₂ + z₂² = k`.
pub fn shell_points(k: u64) -> Vec<(i64, i64)> {
    if k == 0 {
        return vec![(0, 0)];
    }
    let ki = k as i64;
    let bound = (2.0 * (k as f64 / 3.0).sqrt()).ceil() as i64;
    let mut out = Vec::new();
    for z1 in -bound..=bound {
        // z₂² + z₁z₂ + (z₁² − k) = 0
        let disc = 4 * ki - 3 * z1 * z1;
        if disc < 0 {
            continue;
        }
        let s = isqrt(disc as u64) as i64;
        if s * s != disc {
            continue;
        }
        for root in [-z1 + s, -z1 - s] {
            if root % 2 == 0 {
                let z2 = root / 2;
                if !out.contains(&(z1, z2)) {
                    out.push((z1, z2));
                }
            }
        }
    }
    out
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Inclusive shell range `[⌈(r_in/η)²⌉, ⌊(r_out/η)²⌋]` with boundary slack.
/// `None` when empty.
pub fn shell_range(annulus: &Annulus, eta: f64) -> Option<(u64, u64)> {
    let lo = (annulus.r_in / eta).powi(2);
    let hi = (annulus.r_out / eta).powi(2);
    let k_lo = (lo - BOUNDARY_EPS * lo.max(1.0)).ceil().max(0.0);
    let k_hi = (hi + BOUNDARY_EPS * hi.max(1.0)).floor();
    if !(k_hi.is_finite()) || k_hi < k_lo {
        return None;
    }
    Some((k_lo as u64, k_hi as u64))
}

/// A point of `ηH` with its lattice coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticePoint {
    pub k: u64,
    pub z1: i64,
    pub z2: i64,
    pub value: C64,
}

#[derive(Debug, Clone)]
pub struct AnnularConstellation {
    pub annulus: Annulus,
    pub eta: f64,
    /// Sorted by `(|s|², angle)`.
    pub points: Vec<LatticePoint>,
    pub med: f64,
    index: HashMap<(i64, i64), usize>,
}

impl AnnularConstellation {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = C64> + '_ {
        self.points.iter().map(|p| p.value)
    }

    /// Index of the nearest constellation point to `s` (same domain as the
    /// points). Uses lattice decoding and falls back to a full scan when the
    /// nearest lattice point lies outside the annulus.
    pub fn nearest(&self, s: C64) -> usize {
        let w = s / self.eta;
        let z2f = w.im / SQRT3_2;
        let z1f = w.re - 0.5 * z2f;
        let (b1, b2) = (z1f.floor() as i64, z2f.floor() as i64);
        let mut best = (b1, b2);
        let mut best_d = f64::INFINITY;
        // the nearest lattice point is a vertex of the enclosing cell
        for (d1, d2) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let cand = (b1 + d1, b2 + d2);
            let d = (lattice_point(cand.0, cand.1) - w).norm_sqr();
            if d < best_d {
                best_d = d;
                best = cand;
            }
        }
        if let Some(&i) = self.index.get(&best) {
            return i;
        }
        self.points
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (a.value - s).norm_sqr().total_cmp(&(b.value - s).norm_sqr()))
            .map(|(i, _)| i)
            .expect("nearest() on an empty constellation")
    }

    /// CSV dump with header `k,z1,z2,re,im,modulus`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,z1,z2,re,im,modulus\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{},{:.17e},{:.17e},{:.17e}", p.k, p.z1, p.z2, p.value.re, p.value.im, p.value.norm());
        }
        out
    }
}

/// Exact pairwise minimum distance (quadratic; for verification and small
/// sets).
pub fn pairwise_min_distance(points: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.min((a - b).norm());
        }
    }
    best
}

pub fn enumerate_annulus(annulus: &Annulus, eta: f64) -> Result<AnnularConstellation> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(input_error(format!("lattice scale must be finite and positive, got {eta}")));
    }
    let mut points = Vec::new();
    if let Some((k_lo, k_hi)) = shell_range(annulus, eta) {
        for k in k_lo..=k_hi {
            let expected = hex_count(k);
            if expected == 0 {
                continue;
            }
            let mut shell: Vec<LatticePoint> = shell_points(k)
                .into_iter()
                .map(|(z1, z2)| LatticePoint { k, z1, z2, value: lattice_point(z1, z2) * eta })
                .collect();
            debug_assert_eq!(shell.len() as u64, expected, "shell {k}");
            shell.sort_by(|a, b| wrapped_angle(a.value).total_cmp(&wrapped_angle(b.value)));
            points.extend(shell);
        }
    }
    let index = points.iter().enumerate().map(|(i, p)| ((p.z1, p.z2), i)).collect();
    let med = constellation_med(&points, eta);
    Ok(AnnularConstellation { annulus: *annulus, eta, points, med, index })
}

/// `η` if some pair of points are lattice neighbours, else the true pairwise
/// minimum (infinite for fewer than two points).
fn constellation_med(points: &[LatticePoint], eta: f64) -> f64 {
    if points.len() < 2 {
        return f64::INFINITY;
    }
    let present: std::collections::HashSet<(i64, i64)> = points.iter().map(|p| (p.z1, p.z2)).collect();
    let has_neighbours = points
        .iter()
        .any(|p| [(1, 0), (0, 1), (-1, 1)].iter().any(|(a, b)| present.contains(&(p.z1 + a, p.z2 + b))));
    if has_neighbours {
        eta
    } else {
        let values: Vec<C64> = points.iter().map(|p| p.value).collect();
        pairwise_min_distance(&values)
    }
}

/// Angle in `[0, 2π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn wrapped_angle(z: C64) -> f64 {
    wrap_phase(z.arg())
}

/// Phases `(θ₁, θ₂)` in `[0, 2π)` realizing a point on an annulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePair {
    pub theta1: f64,
    pub theta2: f64,
}

impl PhasePair {
    pub fn combine(&self, c1: C64, c2: C64) -> C64 {
        c1 * C64::from_polar(1.0, self.theta1) + c2 * C64::from_polar(1.0, self.theta2)
    }
}

/// Canonical phase pair with `c1·e^{jθ₁} + c2·e^{jθ₂} = s`, using the
/// nonnegative law-of-cosines branch `Δ = arccos(...) ∈ [0, π]`.
pub fn decompose_point(s: C64, c1: C64, c2: C64) -> Result<PhasePair> {
    let (a, b) = (c1.norm(), c2.norm());
    if a == 0.0 || b == 0.0 {
        return Err(input_error("decomposition needs two nonzero coefficients"));
    }
    let rho = s.norm();
    let (r_in, r_out) = ((a - b).abs(), a + b);
    let tol = 1e-9 * r_out.max(1.0);
    if rho < r_in - tol || rho > r_out + tol {
        return Err(Error::Geometry { modulus: rho, r_in, r_out });
    }
    let cos_delta = ((rho * rho - a * a - b * b) / (2.0 * a * b)).clamp(-1.0, 1.0);
    let delta = cos_delta.acos();
    let phi = c2.arg() - c1.arg();
    let base = c1 + c2 * C64::from_polar(1.0, delta - phi);
    let theta1 = if rho == 0.0 || base.norm() == 0.0 { 0.0 } else { (s / base).arg() };
    let theta2 = delta + theta1 - phi;
    Ok(PhasePair { theta1: wrap_phase(theta1), theta2: wrap_phase(theta2) })
}

/// Circle constellation of `order` equally spaced phases starting at angle 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PskConstellation {
    pub radius: f64,
    pub order: usize,
    pub points: Vec<C64>,
    /// Set when even 2-PSK (or the order cap) misses the requested MED.
    pub med_deficient: bool,
}

impl PskConstellation {
    pub fn new(radius: f64, order: usize) -> Self {
        let points = (0..order).map(|m| C64::from_polar(radius, TAU * m as f64 / order as f64)).collect();
        Self { radius, order, points, med_deficient: false }
    }

    pub fn med(&self) -> f64 {
        2.0 * self.radius * (PI / self.order as f64).sin()
    }

    pub fn nearest(&self, s: C64) -> usize {
        let m = self.order as f64;
        let idx = (wrap_phase(s.arg()) * m / TAU).round() as usize;
        idx % self.order
    }
}

/// Largest `M ≥ 2` with `2·radius·sin(π/M) ≥ target_med`.
///
/// The comparison carries a `1e-12` relative slack so exact geometric MEDs
/// (e.g. `√2` for QPSK on the unit circle) are honoured.
pub fn build_psk(radius: f64, target_med: f64) -> Result<PskConstellation> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(input_error(format!("PSK radius must be positive, got {radius}")));
    }
    if !(target_med.is_finite() && target_med > 0.0) {
        return Err(input_error(format!("target MED must be positive, got {target_med}")));
    }
    let meets = |m: usize| 2.0 * radius * (PI / m as f64).sin() >= target_med * (1.0 - 1e-12);
    if !meets(2) {
        let mut psk = PskConstellation::new(radius, 2);
        psk.med_deficient = true;
        return Ok(psk);
    }
    let ratio = (target_med / (2.0 * radius)).min(1.0);
    let estimate = (PI / ratio.asin()).floor();
    let mut m = if estimate.is_finite() { (estimate as usize).clamp(2, MAX_PSK_ORDER) } else { MAX_PSK_ORDER };
    while m > 2 && !meets(m) {
        m -= 1;
    }
    while m < MAX_PSK_ORDER && meets(m + 1) {
        m += 1;
    }
    let mut psk = PskConstellation::new(radius, m);
    psk.med_deficient = m == MAX_PSK_ORDER && meets(m + 1);
    Ok(psk)
}

/// Largest `η` for which the annulus holds at least `target_points` lattice
/// points.
///
/// Cardinality only grows as `η` shrinks through `r_out/√k`, so the search
/// walks the attained shells `k` and returns the first candidate
/// `η = r_out/√k` that meets the target. For `r_in = 0` the origin alone
/// already satisfies a target of one at any scale; the result is then
/// capped at `r_out`.
pub fn scale_for_cardinality(annulus: &Annulus, target_points: usize) -> Result<f64> {
    if target_points == 0 {
        return Err(input_error("target cardinality must be at least 1"));
    }
    if !(annulus.r_out > 0.0 && annulus.r_out.is_finite()) {
        return Err(input_error("annulus must have a positive outer radius"));
    }
    // cumulative[k] = Σ_{k' ≤ k} N_hex(k')
    let mut cumulative: Vec<u64> = vec![1];
    for k in 1..=MAX_SHELL {
        let c = hex_count(k);
        cumulative.push(cumulative[k as usize - 1] + c);
        if c == 0 {
            continue;
        }
        let eta = annulus.r_out / (k as f64).sqrt();
        let Some((lo, hi)) = shell_range(annulus, eta) else { continue };
        let hi = hi.min(k);
        let below = if lo == 0 { 0 } else { cumulative[lo as usize - 1] };
        let count = cumulative[hi as usize] - below;
        if count >= target_points as u64 {
            return Ok(eta);
        }
    }
    Err(Error::Size { size: target_points, limit: MAX_SHELL as usize })
}
