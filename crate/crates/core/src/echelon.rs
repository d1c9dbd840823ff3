//! Stepped row-echelon factorization `Ȟ = B·C·Pᴴ`.
//!
//! `B` is a `τ × τ` unitary, `P` a column permutation and `C = Bᴴ·Ȟ·P` the
//! coefficient matrix. Row `i` of `C` has a target pivot column `k̄_i`;
//! every entry left of its pivot is residual. The combinatorially pairing
//! (CP) algorithm aims for `k̄_i = 2i` (0-based), so each row but the last
//! carries exactly two dominant coefficients. QR gives the triangular
//! pattern `k̄_i = i`; random Haar rotations and a Gram-Schmidt sweep serve as
//! stepped-form baselines.
//!
//! Permutations are stored as index arrays: column `j` of `Ȟ·P` is column
//! `permutation[j]` of `Ȟ`. Pivots are 0-based positions in the permuted
//! order; a pivot equal to `ň` marks a row with no assigned column.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrchan::EquivalentChannel;
use crate::error::input_error;
use crate::linalg::{
    complete_unitary, frobenius_sq, haar_unitary, matrix_from_rows, matrix_to_rows, permute_columns,
    unit_phase, unpermute_columns, Pair,
};
use crate::rng::seeded;
use crate::{CMatrix, Error, Result, C64};

/// Residual columns below this fraction of `‖Ȟ‖_F` are not paired.
pub const NEGLIGIBLE_COLUMN: f64 = 1e-14;

/// Default number of Haar trials for [`random_rotation_decompose`].
pub const DEFAULT_ROTATION_TRIALS: usize = 10_000;

const COMPLETION_SEED: u64 = 0x5eed_c0de;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CP")]
    Cp,
    #[serde(rename = "QR")]
    Qr,
    RandomRotation,
    GramSchmidt,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cp, Method::Qr, Method::RandomRotation, Method::GramSchmidt];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Cp => "CP",
            Method::Qr => "QR",
            Method::RandomRotation => "RandomRotation",
            Method::GramSchmidt => "GramSchmidt",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "cp" => Ok(Method::Cp),
            "qr" => Ok(Method::Qr),
            "randomrotation" | "random" => Ok(Method::RandomRotation),
            "gramschmidt" | "gs" => Ok(Method::GramSchmidt),
            _ => Err(input_error(format!("unknown decomposition method `{s}`"))),
        }
    }
}

/// Bookkeeping that does not affect the factorization itself.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecompositionStats {
    /// Number of pair evaluations (CP only).
    pub pair_evaluations: u64,
    /// Original indices of zero columns skipped as pivots (Gram-Schmidt).
    pub skipped_columns: Vec<usize>,
    /// Rows of `B` filled by orthonormal completion.
    pub completed_rows: usize,
    /// Haar trials scored (random rotation only).
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct EchelonDecomposition {
    pub method: Method,
    /// `B`, `τ × τ` unitary.
    pub rotation: CMatrix,
    pub permutation: Vec<usize>,
    /// `C = Bᴴ·Ȟ·P`, `τ × ň`.
    pub coefficients: CMatrix,
    pub pivots: Vec<usize>,
    pub rre: f64,
    pub stats: DecompositionStats,
}

impl EchelonDecomposition {
    pub fn tau(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn n_check(&self) -> usize {
        self.coefficients.ncols()
    }

    /// `B·C·Pᴴ`.
    pub fn reconstruct(&self) -> CMatrix {
        unpermute_columns(&(&self.rotation * &self.coefficients), &self.permutation)
    }

    /// Energy of the entries left of each row's pivot.
    pub fn residual_energy(&self) -> f64 {
        let n = self.n_check();
        self.pivots
            .iter()
            .enumerate()
            .map(|(i, &p)| (0..p.min(n)).map(|j| self.coefficients[(i, j)].norm_sqr()).sum::<f64>())
            .sum()
    }
}

/// Relative residual error: residual energy over `‖C‖²_F` (equal to
/// `‖Ȟ‖²_F` by unitary invariance). Squared moduli are used throughout.
pub fn relative_residual_error(dec: &EchelonDecomposition) -> Result<f64> {
    let total = frobenius_sq(&dec.coefficients);
    if total <= 0.0 || !total.is_finite() {
        return Err(input_error("coefficient matrix has zero Frobenius norm"));
    }
    Ok((dec.residual_energy() / total).clamp(0.0, 1.0))
}

/// Best rank-one direction for a column pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairChoice {
    pub i: usize,
    pub j: usize,
    pub basis: DVector<C64>,
    /// `‖a_i‖² + ‖a_j‖² − λ_max(AᴴA)`.
    pub error: f64,
}

/// Largest eigenvalue of `[[n1, g], [ḡ, n2]]` and the total projection error
/// `n1 + n2 − λ_max`, evaluated as `det/λ_max` (the smaller eigenvalue).
#[inline]
fn gram_eigen(n1: f64, n2: f64, g: C64) -> (f64, f64) {
    let g2 = g.norm_sqr();
    let half_diff = 0.5 * (n1 - n2);
    let lambda_max = 0.5 * (n1 + n2) + (half_diff * half_diff + g2).sqrt();
    let error = if lambda_max > 0.0 { ((n1 * n2 - g2) / lambda_max).max(0.0) } else { 0.0 };
    (lambda_max, error)
}

/// Unit vector `A·v/‖A·v‖` where `v` is the dominant eigenvector of the 2×2
/// Gram matrix `AᴴA`.
fn dominant_direction(a1: &[C64], a2: &[C64], n1: f64, n2: f64, g: C64, lambda_max: f64) -> DVector<C64> {
    // two algebraically equivalent eigenvector forms; take the better
    // conditioned one
    let va = (g, C64::new(lambda_max - n1, 0.0));
    let vb = (C64::new(lambda_max - n2, 0.0), g.conj());
    let norm = |v: &(C64, C64)| v.0.norm_sqr() + v.1.norm_sqr();
    let v = if norm(&va) >= norm(&vb) { va } else { vb };
    let v = if norm(&v) == 0.0 {
        if n1 >= n2 {
            (C64::new(1.0, 0.0), C64::default())
        } else {
            (C64::default(), C64::new(1.0, 0.0))
        }
    } else {
        v
    };
    let mut b = DVector::from_iterator(a1.len(), a1.iter().zip(a2).map(|(x, y)| x * v.0 + y * v.1));
    let nb = b.norm();
    b.unscale_mut(nb);
    b
}

fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(C64::default(), |acc, (x, y)| acc + x.conj() * y)
}

fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Optimal unit direction for approximating two columns jointly.
pub fn pair_residual(a1: &[C64], a2: &[C64]) -> Result<PairChoice> {
    if a1.len() != a2.len() || a1.is_empty() {
        return Err(input_error("pair columns must have the same nonzero length"));
    }
    let (n1, n2) = (norm_sqr(a1), norm_sqr(a2));
    if n1 == 0.0 && n2 == 0.0 {
        return Err(Error::DegeneratePair);
    }
    let g = dotc(a1, a2);
    let (lambda_max, error) = gram_eigen(n1, n2, g);
    let basis = dominant_direction(a1, a2, n1, n2, g, lambda_max);
    Ok(PairChoice { i: 0, j: 1, basis, error })
}

/// Column-major residual matrix with cheap column access.
struct Residual {
    rows: usize,
    data: Vec<C64>,
}

impl Residual {
    fn new(h: &CMatrix) -> Self {
        Self { rows: h.nrows(), data: h.as_slice().to_vec() }
    }

    fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// `a ← a − b·(bᴴa)` on the given columns.
    fn deflate(&mut self, b: &DVector<C64>, cols: &[usize]) {
        let rows = self.rows;
        for &j in cols {
            let col = &mut self.data[j * rows..(j + 1) * rows];
            let coef = dotc(b.as_slice(), col);
            for (x, bk) in col.iter_mut().zip(b.iter()) {
                *x -= bk * coef;
            }
        }
    }
}

/// Removes the components of `b` along `basis` and renormalizes.
fn reorthogonalize(mut b: DVector<C64>, basis: &[DVector<C64>]) -> Option<DVector<C64>> {
    for q in basis {
        let c = q.dotc(&b);
        b -= q * c;
    }
    let nb = b.norm();
    if nb <= 1e-12 {
        return None;
    }
    b.unscale_mut(nb);
    Some(b)
}

/// Minimum-error pair among `eligible` (ascending original indices), ties
/// broken lexicographically on `(i, j)`.
fn best_pair(res: &Residual, eligible: &[usize], norms: &[f64]) -> (f64, usize, usize) {
    let key = |a: &(f64, usize, usize), b: &(f64, usize, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2));
    (0..eligible.len())
        .into_par_iter()
        .filter_map(|p| {
            let i = eligible[p];
            let ai = res.col(i);
            eligible[p + 1..]
                .iter()
                .map(|&j| {
                    let (_, err) = gram_eigen(norms[i], norms[j], dotc(ai, res.col(j)));
                    (err, i, j)
                })
                .min_by(key)
        })
        .min_by(key)
        .expect("at least one pair")
}

pub fn cp_decompose(eq: &EquivalentChannel) -> Result<EchelonDecomposition> {
    cp_decompose_matrix(&eq.hcheck)
}

/// CP factorization of an explicit `τ × ň` matrix.
pub fn cp_decompose_matrix(h: &CMatrix) -> Result<EchelonDecomposition> {
    let (tau, n) = validate(h)?;
    let floor_sq = NEGLIGIBLE_COLUMN * NEGLIGIBLE_COLUMN * frobenius_sq(h);
    let mut res = Residual::new(h);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut basis: Vec<DVector<C64>> = Vec::with_capacity(tau);
    let mut perm = Vec::with_capacity(n);
    let mut pivots = Vec::with_capacity(tau);
    let mut stats = DecompositionStats::default();

    // with ň < 2τ−1 only ň−τ rows can carry a pair; the rest take one column
    let pair_steps = if n + 1 >= 2 * tau { tau } else { n - tau };
    for t in 0..tau {
        let mut norms = vec![0.0; n];
        for &j in &remaining {
            norms[j] = norm_sqr(res.col(j));
        }
        let eligible: Vec<usize> = remaining.iter().copied().filter(|&j| norms[j] >= floor_sq && norms[j] > 0.0).collect();
        let m = eligible.len() as u64;
        let (b, chosen) = match eligible.len() {
            0 => break,
            m if m == 1 || t >= pair_steps => {
                let j = eligible.iter().copied().fold(eligible[0], |a, b| if norms[b] > norms[a] { b } else { a });
                let col = res.col(j);
                let mut b = DVector::from_column_slice(col);
                b.unscale_mut(norms[j].sqrt());
                (b, vec![j])
            }
            _ => {
                let (_, i, j) = best_pair(&res, &eligible, &norms);
                stats.pair_evaluations += m * (m - 1) / 2;
                let (ai, aj) = (res.col(i), res.col(j));
                let g = dotc(ai, aj);
                let (lambda_max, _) = gram_eigen(norms[i], norms[j], g);
                let b = dominant_direction(ai, aj, norms[i], norms[j], g, lambda_max);
                let (ci, cj) = (dotc(b.as_slice(), ai).norm(), dotc(b.as_slice(), aj).norm());
                (b, if cj > ci { vec![j, i] } else { vec![i, j] })
            }
        };
        let Some(b) = reorthogonalize(b, &basis) else { break };
        pivots.push(perm.len());
        perm.extend_from_slice(&chosen);
        remaining.retain(|j| !chosen.contains(j));
        res.deflate(&b, &remaining);
        basis.push(b);
    }
    perm.extend_from_slice(&remaining);
    assemble(Method::Cp, h, basis, perm, pivots, stats)
}

/// Stacks the accepted basis vectors, completes them to a unitary if needed,
/// and finalizes.
fn assemble(
    method: Method,
    h: &CMatrix,
    basis: Vec<DVector<C64>>,
    perm: Vec<usize>,
    mut pivots: Vec<usize>,
    mut stats: DecompositionStats,
) -> Result<EchelonDecomposition> {
    let (tau, n) = h.shape();
    let mut partial = CMatrix::zeros(tau, basis.len());
    for (k, b) in basis.iter().enumerate() {
        partial.set_column(k, b);
    }
    let rotation = if basis.len() < tau {
        stats.completed_rows = tau - basis.len();
        pivots.resize(tau, n);
        complete_unitary(&partial, tau, &mut seeded(COMPLETION_SEED))
    } else {
        partial
    };
    finalize(method, h, rotation, perm, pivots, stats)
}

/// Forms `C = Bᴴ·Ȟ·P`, rotates each row so its pivot entry is real and
/// nonnegative (the phase moves into `B`), and scores the residual.
fn finalize(
    method: Method,
    h: &CMatrix,
    mut rotation: CMatrix,
    permutation: Vec<usize>,
    pivots: Vec<usize>,
    stats: DecompositionStats,
) -> Result<EchelonDecomposition> {
    let n = h.ncols();
    let mut coefficients = rotation.adjoint() * permute_columns(h, &permutation);
    for (i, &p) in pivots.iter().enumerate() {
        if p >= n {
            continue;
        }
        let ph = unit_phase(coefficients[(i, p)]);
        for j in 0..n {
            coefficients[(i, j)] *= ph.conj();
        }
        for k in 0..rotation.nrows() {
            rotation[(k, i)] *= ph;
        }
        coefficients[(i, p)] = C64::new(coefficients[(i, p)].re, 0.0);
    }
    let mut dec = EchelonDecomposition { method, rotation, permutation, coefficients, pivots, rre: 0.0, stats };
    dec.rre = relative_residual_error(&dec)?;
    Ok(dec)
}

fn validate(h: &CMatrix) -> Result<(usize, usize)> {
    let (tau, n) = h.shape();
    if tau == 0 || n == 0 {
        return Err(input_error("equivalent channel must be nonempty"));
    }
    if tau > n {
        return Err(input_error(format!("equivalent channel is {tau}x{n}; rows must not exceed columns")));
    }
    if frobenius_sq(h) == 0.0 {
        return Err(input_error("equivalent channel is zero"));
    }
    Ok((tau, n))
}

pub fn qr_decompose(eq: &EquivalentChannel) -> Result<EchelonDecomposition> {
    qr_decompose_matrix(&eq.hcheck)
}

/// Householder QR of `Ȟ`; the diagonal of `C` is made real positive.
pub fn qr_decompose_matrix(h: &CMatrix) -> Result<EchelonDecomposition> {
    let (tau, n) = validate(h)?;
    let q = h.clone().qr().q();
    finalize(Method::Qr, h, q, (0..n).collect(), (0..tau).collect(), DecompositionStats::default())
}

/// Greedy stepped placement for a given `C = Bᴴ·Ȟ`: row by row, the two
/// largest-magnitude unused columns go to the row's pivot pair (larger
/// first). Returns `(permutation, pivots)`.
fn greedy_stepped_permutation(c: &CMatrix) -> (Vec<usize>, Vec<usize>) {
    let (tau, n) = c.shape();
    let mut used = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    let mut pivots = Vec::with_capacity(tau);
    for r in 0..tau {
        let avail = n - perm.len();
        if avail == 0 {
            pivots.push(n);
            continue;
        }
        pivots.push(perm.len());
        let mut top: [Option<(f64, usize)>; 2] = [None, None];
        for j in (0..n).filter(|&j| !used[j]) {
            let m = c[(r, j)].norm_sqr();
            match top {
                [None, _] => top[0] = Some((m, j)),
                [Some((m0, _)), _] if m > m0 => {
                    top[1] = top[0];
                    top[0] = Some((m, j));
                }
                [_, None] => top[1] = Some((m, j)),
                [_, Some((m1, _))] if m > m1 => top[1] = Some((m, j)),
                _ => {}
            }
        }
        for (_, j) in top.into_iter().flatten() {
            used[j] = true;
            perm.push(j);
        }
    }
    perm.extend((0..n).filter(|&j| !used[j]));
    (perm, pivots)
}

fn stepped_residual(c: &CMatrix, perm: &[usize], pivots: &[usize]) -> f64 {
    pivots
        .iter()
        .enumerate()
        .map(|(i, &p)| perm[..p.min(perm.len())].iter().map(|&j| c[(i, j)].norm_sqr()).sum::<f64>())
        .sum()
}

pub fn random_rotation_decompose(eq: &EquivalentChannel, trials: usize, seed: u64) -> Result<EchelonDecomposition> {
    random_rotation_decompose_matrix(&eq.hcheck, trials, seed)
}

/// Best of `trials` Haar rotations, each scored with its greedy stepped
/// permutation.
pub fn random_rotation_decompose_matrix(h: &CMatrix, trials: usize, seed: u64) -> Result<EchelonDecomposition> {
    let (tau, _) = validate(h)?;
    if trials == 0 {
        return Err(input_error("random rotation needs at least one trial"));
    }
    let mut rng = seeded(seed);
    let mut best: Option<(f64, CMatrix)> = None;
    for _ in 0..trials {
        let b = haar_unitary(tau, &mut rng);
        let c = b.adjoint() * h;
        let (perm, pivots) = greedy_stepped_permutation(&c);
        let score = stepped_residual(&c, &perm, &pivots);
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, b));
        }
    }
    let (_, b) = best.expect("trials >= 1");
    let (perm, pivots) = greedy_stepped_permutation(&(b.adjoint() * h));
    let stats = DecompositionStats { trials, ..Default::default() };
    finalize(Method::RandomRotation, h, b, perm, pivots, stats)
}

pub fn gram_schmidt_decompose(eq: &EquivalentChannel) -> Result<EchelonDecomposition> {
    gram_schmidt_decompose_matrix(&eq.hcheck)
}

/// At step `t` the first remaining nonzero column (original order) becomes
/// basis vector `t`; it and its successor among the remaining columns take
/// positions `(2t, 2t+1)`, and the rest are orthogonalized against the new
/// vector.
pub fn gram_schmidt_decompose_matrix(h: &CMatrix) -> Result<EchelonDecomposition> {
    let (tau, _) = validate(h)?;
    let floor_sq = NEGLIGIBLE_COLUMN * NEGLIGIBLE_COLUMN * frobenius_sq(h);
    let mut res = Residual::new(h);
    let mut remaining: Vec<usize> = (0..h.ncols()).collect();
    let mut basis: Vec<DVector<C64>> = Vec::with_capacity(tau);
    let mut perm = Vec::new();
    let mut pivots = Vec::with_capacity(tau);
    let mut stats = DecompositionStats::default();

    for _ in 0..tau {
        let lead = remaining.iter().position(|&j| {
            let nz = norm_sqr(res.col(j)) > floor_sq.max(0.0) && norm_sqr(res.col(j)) > 0.0;
            if !nz && !stats.skipped_columns.contains(&j) {
                stats.skipped_columns.push(j);
            }
            nz
        });
        let Some(pos) = lead else { break };
        let j = remaining[pos];
        let mut b = DVector::from_column_slice(res.col(j));
        let nb = b.norm();
        b.unscale_mut(nb);
        let Some(b) = reorthogonalize(b, &basis) else { break };
        remaining.remove(pos);
        pivots.push(perm.len());
        perm.push(j);
        if pos < remaining.len() {
            perm.push(remaining.remove(pos));
        }
        res.deflate(&b, &remaining);
        basis.push(b);
    }
    perm.extend_from_slice(&remaining);
    assemble(Method::GramSchmidt, h, basis, perm, pivots, stats)
}

/// Options shared by [`decompose`].
#[derive(Debug, Clone, Copy)]
pub struct DecomposeOptions {
    pub rotation_trials: usize,
    pub seed: u64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { rotation_trials: DEFAULT_ROTATION_TRIALS, seed: 0 }
    }
}

pub fn decompose(eq: &EquivalentChannel, method: Method, opts: &DecomposeOptions) -> Result<EchelonDecomposition> {
    decompose_matrix(&eq.hcheck, method, opts)
}

pub fn decompose_matrix(h: &CMatrix, method: Method, opts: &DecomposeOptions) -> Result<EchelonDecomposition> {
    match method {
        Method::Cp => cp_decompose_matrix(h),
        Method::Qr => qr_decompose_matrix(h),
        Method::RandomRotation => random_rotation_decompose_matrix(h, opts.rotation_trials, opts.seed),
        Method::GramSchmidt => gram_schmidt_decompose_matrix(h),
    }
}

/// JSON layout of a decomposition. Matrices are row-major nested
/// `[re, im]` pairs; `P` and `pivots` are 0-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionDump {
    pub method: Method,
    #[serde(rename = "B")]
    pub b: Vec<Vec<Pair>>,
    #[serde(rename = "P")]
    pub p: Vec<usize>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<Pair>>,
    pub pivots: Vec<usize>,
    pub rre: f64,
}

impl From<&EchelonDecomposition> for DecompositionDump {
    fn from(d: &EchelonDecomposition) -> Self {
        Self {
            method: d.method,
            b: matrix_to_rows(&d.rotation),
            p: d.permutation.clone(),
            c: matrix_to_rows(&d.coefficients),
            pivots: d.pivots.clone(),
            rre: d.rre,
        }
    }
}

impl DecompositionDump {
    /// `B·C·Pᴴ` recovered from the dump.
    pub fn equivalent_matrix(&self) -> Result<CMatrix> {
        let b = matrix_from_rows(&self.b).ok_or_else(|| input_error("malformed B"))?;
        let c = matrix_from_rows(&self.c).ok_or_else(|| input_error("malformed C"))?;
        if b.ncols() != c.nrows() || self.p.len() != c.ncols() {
            return Err(input_error("inconsistent decomposition dimensions"));
        }
        let mut seen = vec![false; self.p.len()];
        for &j in &self.p {
            if j >= seen.len() || std::mem::replace(&mut seen[j], true) {
                return Err(input_error("P is not a permutation"));
            }
        }
        Ok(unpermute_columns(&(b * c), &self.p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_defect;
    use crate::rng::complex_normal;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn real(rows: &[&[f64]]) -> CMatrix {
        CMatrix::from_fn(rows.len(), rows[0].len(), |i, j| c(rows[i][j], 0.0))
    }

    fn gaussian(tau: usize, n: usize, seed: u64) -> CMatrix {
        let mut rng = seeded(seed);
        CMatrix::from_fn(tau, n, |_, _| complex_normal(&mut rng))
    }

    fn check_valid(d: &EchelonDecomposition, h: &CMatrix) {
        assert!(unitarity_defect(&d.rotation) < 1e-10, "{}: BᴴB defect", d.method);
        assert!((d.reconstruct() - h).norm() <= 1e-9 * h.norm(), "{}: reconstruction", d.method);
        assert_abs_diff_eq!(d.coefficients.norm(), h.norm(), epsilon = 1e-9 * h.norm());
        assert!((0.0..=1.0).contains(&d.rre));
        let mut sorted = d.permutation.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..h.ncols()).collect::<Vec<_>>());
    }

    #[test]
    fn pair_residual_collinear() {
        let e1 = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let p = pair_residual(&e1, &e1).unwrap();
        assert_abs_diff_eq!(p.error, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.basis[0].norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn pair_residual_orthonormal() {
        let p = pair_residual(&[c(1.0, 0.0), c(0.0, 0.0)], &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(p.error, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.basis.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pair_residual_degenerate() {
        let z = [C64::default(); 3];
        assert_eq!(pair_residual(&z, &z), Err(Error::DegeneratePair));
        // a single zero column is fine: the other column is its own direction
        let p = pair_residual(&z, &[c(0.0, 2.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(p.error, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn pair_residual_matches_projection() {
        let mut rng = seeded(21);
        for _ in 0..50 {
            let a1: Vec<C64> = (0..4).map(|_| complex_normal(&mut rng)).collect();
            let a2: Vec<C64> = (0..4).map(|_| complex_normal(&mut rng)).collect();
            let p = pair_residual(&a1, &a2).unwrap();
            // ‖A − b(bᴴA)‖²_F evaluated directly
            let direct: f64 = [&a1, &a2]
                .iter()
                .map(|a| {
                    let coef = p.basis.iter().zip(a.iter()).fold(C64::default(), |s, (b, x)| s + b.conj() * x);
                    a.iter().zip(p.basis.iter()).map(|(x, b)| (x - b * coef).norm_sqr()).sum::<f64>()
                })
                .sum();
            assert_abs_diff_eq!(p.error, direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn cp_duplicated_columns_are_exact() {
        let h = real(&[&[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 1.0]]);
        let d = cp_decompose_matrix(&h).unwrap();
        check_valid(&d, &h);
        let first: Vec<usize> = {
            let mut v = d.permutation[..2].to_vec();
            v.sort_unstable();
            v
        };
        assert!(first == vec![0, 2] || first == vec![1, 3]);
        // lexicographic tie-break prefers the pair containing column 0
        assert_eq!(first, vec![0, 2]);
        assert_abs_diff_eq!(d.rre, 0.0, epsilon = 1e-15);
        assert_eq!(d.pivots, vec![0, 2]);
        assert!(d.coefficients[(1, 0)].norm() < 1e-15 && d.coefficients[(1, 1)].norm() < 1e-15);
    }

    #[test]
    fn cp_single_row() {
        let h = gaussian(1, 5, 2);
        let d = cp_decompose_matrix(&h).unwrap();
        check_valid(&d, &h);
        assert_eq!(d.rre, 0.0);
        assert_abs_diff_eq!(d.rotation[(0, 0)].norm(), 1.0, epsilon = 1e-12);
        // pivot entry is real positive and the larger of the pair
        assert!(d.coefficients[(0, 0)].im == 0.0 && d.coefficients[(0, 0)].re > 0.0);
        assert!(d.coefficients[(0, 0)].norm() >= d.coefficients[(0, 1)].norm());
    }

    #[test]
    fn cp_pair_count_and_pivots() {
        let h = gaussian(3, 7, 5);
        let d = cp_decompose_matrix(&h).unwrap();
        check_valid(&d, &h);
        assert_eq!(d.stats.pair_evaluations, 21 + 10 + 3);
        assert_eq!(d.pivots, vec![0, 2, 4]);
    }

    #[test]
    fn cp_square_case_uses_singles() {
        let h = gaussian(4, 4, 8);
        let d = cp_decompose_matrix(&h).unwrap();
        check_valid(&d, &h);
        assert_eq!(d.stats.pair_evaluations, 0);
        assert_eq!(d.pivots, vec![0, 1, 2, 3]);
        assert!(d.rre < 1e-24);

        // ň = 5, τ = 4: one pair, then singles
        let h = gaussian(4, 5, 9);
        let d = cp_decompose_matrix(&h).unwrap();
        check_valid(&d, &h);
        assert_eq!(d.stats.pair_evaluations, 10);
        assert_eq!(d.pivots, vec![0, 2, 3, 4]);
    }

    #[test]
    fn cp_completes_basis_for_rank_deficient_input() {
        // rank-one 2x4 input: the second row is filled by completion
        let h = real(&[&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.0]]);
        let d = cp_decompose_matrix(&h).unwrap();
        check_valid(&d, &h);
        assert_eq!(d.stats.completed_rows, 1);
        assert_eq!(d.pivots, vec![0, 4]);
        assert_abs_diff_eq!(d.rre, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cp_odd_columns_take_a_single() {
        let h = gaussian(3, 5, 9);
        let d = cp_decompose_matrix(&h).unwrap();
        check_valid(&d, &h);
        assert_eq!(d.pivots, vec![0, 2, 4]);
        assert_eq!(d.stats.pair_evaluations, 10 + 3);
    }

    #[test]
    fn qr_identity() {
        let h = CMatrix::identity(3, 3);
        let d = qr_decompose_matrix(&h).unwrap();
        assert!((d.rotation.clone() - CMatrix::identity(3, 3)).norm() < 1e-12);
        assert!((d.coefficients.clone() - CMatrix::identity(3, 3)).norm() < 1e-12);
        assert_eq!(d.rre, 0.0);
    }

    #[test]
    fn qr_regularization_contract() {
        let h = gaussian(4, 9, 1);
        let d = qr_decompose_matrix(&h).unwrap();
        check_valid(&d, &h);
        for i in 0..4 {
            assert_eq!(d.coefficients[(i, i)].im, 0.0);
            assert!(d.coefficients[(i, i)].re > 0.0);
            for j in 0..i {
                assert!(d.coefficients[(i, j)].norm() <= 1e-12);
            }
        }
        assert!(d.rre < 1e-24);
    }

    #[test]
    fn qr_of_displayed_small_channel() {
        // the one-decimal 3x7 example channel
        let h = CMatrix::from_row_slice(
            3,
            7,
            &[
                c(-2.0, 1.6), c(-3.6, 0.1), c(-3.4, -2.8), c(-1.3, 2.1), c(-2.6, 0.7), c(-2.0, -2.0), c(-0.2, -0.1),
                c(-0.4, 0.6), c(0.1, 0.0), c(0.9, 0.1), c(-0.2, 1.0), c(-0.1, 0.3), c(0.3, 0.2), c(-0.6, 0.0),
                c(-0.1, 0.1), c(0.0, 0.1), c(0.0, 0.0), c(0.2, 0.2), c(0.1, 0.0), c(0.2, -0.1), c(0.4, -0.4),
            ],
        );
        let d = qr_decompose_matrix(&h).unwrap();
        assert_abs_diff_eq!(d.coefficients[(0, 0)].re, 2.7, epsilon = 0.1);
        assert_abs_diff_eq!(d.coefficients[(1, 1)].re, 1.1, epsilon = 0.1);
        assert_abs_diff_eq!(d.coefficients[(2, 2)].re, 0.2, epsilon = 0.1);
        let cp = cp_decompose_matrix(&h).unwrap();
        check_valid(&cp, &h);
        for i in 1..3 {
            for j in 0..2 * i {
                assert!(cp.coefficients[(i, j)].norm() <= 0.2, "C[{i},{j}] = {}", cp.coefficients[(i, j)]);
            }
        }
    }

    #[test]
    fn random_rotation_single_row_and_monotone() {
        let h = gaussian(1, 6, 3);
        assert_eq!(random_rotation_decompose_matrix(&h, 1, 4).unwrap().rre, 0.0);
        assert!(random_rotation_decompose_matrix(&h, 0, 4).is_err());

        let h = gaussian(3, 12, 4);
        let mut last = f64::INFINITY;
        for trials in [10, 100, 1000] {
            let d = random_rotation_decompose_matrix(&h, trials, 77).unwrap();
            check_valid(&d, &h);
            assert!(d.rre <= last);
            last = d.rre;
        }
    }

    #[test]
    fn greedy_permutation_places_largest_pairs() {
        let cm = real(&[&[0.1, 3.0, 0.2, 2.0], &[5.0, 9.0, 4.0, 0.0]]);
        let (perm, pivots) = greedy_stepped_permutation(&cm);
        assert_eq!(perm, vec![1, 3, 0, 2]);
        assert_eq!(pivots, vec![0, 2]);
        assert_abs_diff_eq!(stepped_residual(&cm, &perm, &pivots), 81.0, epsilon = 1e-12);
    }

    #[test]
    fn gram_schmidt_orthogonal_columns() {
        // Ȟ = [2e₁, 3e₂, e₁+e₂]: step 1 takes e₁ with successor 3e₂, so row 2
        // carries C[1,1] = 3 as residual
        let h = real(&[&[2.0, 0.0, 1.0], &[0.0, 3.0, 1.0]]);
        let d = gram_schmidt_decompose_matrix(&h).unwrap();
        check_valid(&d, &h);
        assert_eq!(d.permutation, vec![0, 1, 2]);
        assert_abs_diff_eq!(d.rre, 9.0 / 15.0, epsilon = 1e-12);
    }

    #[test]
    fn gram_schmidt_skips_zero_column() {
        let mut h = gaussian(2, 5, 6);
        h.column_mut(0).fill(C64::default());
        let d = gram_schmidt_decompose_matrix(&h).unwrap();
        check_valid(&d, &h);
        assert_eq!(d.stats.skipped_columns, vec![0]);
        assert_eq!(d.permutation[0], 1);
    }

    #[test]
    fn rre_arithmetic() {
        let cm = real(&[&[1.0, 1.0, 1.0, 1.0], &[0.5, 0.5, 1.0, 1.0]]);
        let d = EchelonDecomposition {
            method: Method::Cp,
            rotation: CMatrix::identity(2, 2),
            permutation: (0..4).collect(),
            coefficients: cm,
            pivots: vec![0, 2],
            rre: 0.0,
            stats: DecompositionStats::default(),
        };
        assert_abs_diff_eq!(relative_residual_error(&d).unwrap(), 0.5 / 6.5, epsilon = 1e-15);
        let zero = EchelonDecomposition { coefficients: CMatrix::zeros(2, 4), ..d };
        assert!(relative_residual_error(&zero).is_err());
    }

    #[test]
    fn all_methods_valid_on_random_matrices() {
        for (k, (tau, n)) in [(2, 9), (3, 20), (4, 33), (4, 5)].into_iter().enumerate() {
            let h = gaussian(tau, n, 100 + k as u64);
            for m in Method::ALL {
                let opts = DecomposeOptions { rotation_trials: 200, seed: 1 };
                let d = decompose_matrix(&h, m, &opts).unwrap();
                check_valid(&d, &h);
                assert_eq!(d.method, m);
            }
        }
    }

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("gram-schmidt".parse::<Method>().unwrap(), Method::GramSchmidt);
        assert!("svd".parse::<Method>().is_err());
    }

    #[test]
    fn dump_recovers_matrix() {
        let h = gaussian(3, 8, 12);
        let d = cp_decompose_matrix(&h).unwrap();
        let dump = DecompositionDump::from(&d);
        let text = serde_json::to_string(&dump).unwrap();
        assert!(text.starts_with("{\"method\":\"CP\""));
        let back: DecompositionDump = serde_json::from_str(&text).unwrap();
        assert!((back.equivalent_matrix().unwrap() - h).norm() < 1e-12);
    }
}
