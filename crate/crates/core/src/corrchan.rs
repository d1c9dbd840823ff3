//! Spatially correlated RIS channel synthesis and reduction to the
//! equivalent full-row-rank, purely reflective model.
//!
//! Element positions are kept in units of the wavelength, so the correlation
//! between elements `i` and `j` is `sinc(2·dist_ij)` with the normalized
//! `sinc(x) = sin(πx)/(πx)`.
//!
//! The equivalent channel is obtained from the augmented gain matrix
//! `G = [H·diag(g), d]` (shape `n_R × (n+1)`): with `G = U·Σ·Vᴴ`, the
//! equivalent matrix is `Ȟ = Σ_τ·V_τᴴ`, where `τ` counts the singular values
//! above `rank_tolerance·σ₁`. The direct path becomes the last (virtual)
//! element.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::input_error;
use crate::linalg::{from_pair, to_pair, Pair};
use crate::rng::{complex_normal, seeded};
use crate::{CMatrix, Error, Result, C64};

/// Default relative rank threshold for the equivalent reduction.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

/// Eigenvalues below this fraction of the largest are clamped to zero when
/// forming the correlation square root.
pub const EIGEN_CLAMP_RATIO: f64 = 1e-12;

const DEGENERATE_SIGMA: f64 = 1e-300;

/// Rectangular RIS layout with uniform pitch, positions in wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct RisGrid {
    n_x: usize,
    n_y: usize,
    spacing: f64,
    positions: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    n_x: usize,
    n_y: usize,
    spacing: f64,
}

impl TryFrom<GridSpec> for RisGrid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        RisGrid::new(s.n_x, s.n_y, s.spacing)
    }
}

impl From<RisGrid> for GridSpec {
    fn from(g: RisGrid) -> Self {
        GridSpec { n_x: g.n_x, n_y: g.n_y, spacing: g.spacing }
    }
}

impl RisGrid {
    /// `n_x` columns by `n_y` rows with pitch `spacing` (in wavelengths).
    /// Positions are laid out row-major.
    pub fn new(n_x: usize, n_y: usize, spacing: f64) -> Result<Self> {
        if n_x == 0 || n_y == 0 {
            return Err(input_error(format!("grid must be nonempty, got {n_x}x{n_y}")));
        }
        if !spacing.is_finite() || spacing <= 0.0 {
            return Err(input_error(format!("grid spacing must be finite and positive, got {spacing}")));
        }
        let positions = (0..n_y)
            .flat_map(|y| (0..n_x).map(move |x| (x as f64 * spacing, y as f64 * spacing)))
            .collect();
        Ok(Self { n_x, n_y, spacing, positions })
    }

    /// Near-square grid holding exactly `n` elements: `n_y` is the largest
    /// divisor of `n` not exceeding `√n`, so that `n_x ≥ n_y`.
    pub fn near_square(n: usize, spacing: f64) -> Result<Self> {
        if n == 0 {
            return Err(input_error("grid must be nonempty"));
        }
        let mut n_y = (n as f64).sqrt().floor() as usize;
        while !n.is_multiple_of(n_y) {
            n_y -= 1;
        }
        Self::new(n / n_y, n_y, spacing)
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }
}

/// Amplitude attenuation coefficients in dB (`20·log10(μ)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttenuationSpec {
    pub mu_los_db: f64,
    pub mu_rr_db: f64,
    pub mu_tr_db: f64,
}

impl AttenuationSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu_los_db", self.mu_los_db), ("mu_rr_db", self.mu_rr_db), ("mu_tr_db", self.mu_tr_db)] {
            if !v.is_finite() {
                return Err(input_error(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn mu_los(&self) -> f64 {
        db_to_amplitude(self.mu_los_db)
    }

    pub fn mu_rr(&self) -> f64 {
        db_to_amplitude(self.mu_rr_db)
    }

    pub fn mu_tr(&self) -> f64 {
        db_to_amplitude(self.mu_tr_db)
    }
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Normalized sinc, `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Sinc spatial correlation matrix together with a real square-root factor.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub r: DMatrix<f64>,
    /// Absolute clamping threshold applied to the eigenvalues of `r`.
    pub eigen_floor: f64,
    /// `F` with `F·Fᵀ ≈ r`.
    pub sqrt_factor: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.r.nrows()
    }
}

pub fn build_correlation_matrix(grid: &RisGrid) -> Result<CorrelationMatrix> {
    let pos = grid.positions();
    if pos.is_empty() {
        return Err(input_error("grid has no elements"));
    }
    if pos.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(input_error("grid positions must be finite"));
    }
    let n = pos.len();
    let r = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            let (dx, dy) = (pos[i].0 - pos[j].0, pos[i].1 - pos[j].1);
            sinc(2.0 * dx.hypot(dy))
        }
    });

    let eig = SymmetricEigen::new(r.clone());
    let lambda_max = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let eigen_floor = EIGEN_CLAMP_RATIO * lambda_max;
    let mut sqrt_factor = eig.eigenvectors;
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = if lam < eigen_floor { 0.0 } else { lam.sqrt() };
        sqrt_factor.column_mut(j).scale_mut(s);
    }
    Ok(CorrelationMatrix { r, eigen_floor, sqrt_factor })
}

/// Raw gains for one channel drop.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `n_R × n`, row `k` is `h_kᵀ`.
    pub h: CMatrix,
    pub g: Vec<C64>,
    pub d: Vec<C64>,
    pub seed: u64,
    pub grid: RisGrid,
    pub attenuation: AttenuationSpec,
}

impl ChannelRealization {
    pub fn n_r(&self) -> usize {
        self.h.nrows()
    }

    pub fn n(&self) -> usize {
        self.h.ncols()
    }

    /// `[H·diag(g), d]`.
    pub fn augmented(&self) -> CMatrix {
        let (n_r, n) = (self.n_r(), self.n());
        CMatrix::from_fn(n_r, n + 1, |i, j| if j < n { self.h[(i, j)] * self.g[j] } else { self.d[i] })
    }
}

/// Draws one channel. Draw order: `h_1, ..., h_{n_R}`, then `g`, then `d`;
/// every correlated vector consumes `n` complex normals (real part first).
pub fn sample_channel(
    grid: &RisGrid,
    attenuation: &AttenuationSpec,
    n_r: usize,
    corr: &CorrelationMatrix,
    seed: u64,
) -> Result<ChannelRealization> {
    attenuation.validate()?;
    let n = grid.len();
    if n_r == 0 {
        return Err(input_error("n_R must be at least 1"));
    }
    if corr.dim() != n {
        return Err(input_error(format!(
            "correlation matrix is {0}x{0} but the grid has {n} elements",
            corr.dim()
        )));
    }
    let mut rng = seeded(seed);
    let mut correlated = |mu: f64| -> Vec<C64> {
        let w: Vec<C64> = (0..n).map(|_| complex_normal(&mut rng)).collect();
        let re = &corr.sqrt_factor * DVector::from_iterator(n, w.iter().map(|z| z.re));
        let im = &corr.sqrt_factor * DVector::from_iterator(n, w.iter().map(|z| z.im));
        re.iter().zip(im.iter()).map(|(&a, &b)| C64::new(a, b) * mu).collect()
    };

    let mut h = CMatrix::zeros(n_r, n);
    for k in 0..n_r {
        let row = correlated(attenuation.mu_rr());
        for (j, z) in row.into_iter().enumerate() {
            h[(k, j)] = z;
        }
    }
    let g = correlated(attenuation.mu_tr());
    let mu_los = attenuation.mu_los();
    let d = (0..n_r).map(|_| complex_normal(&mut rng) * mu_los).collect();

    Ok(ChannelRealization { h, g, d, seed, grid: grid.clone(), attenuation: *attenuation })
}

/// Reduced channel `Ȟ` (`τ × ň`) with orthogonal rows of norms `ρ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentChannel {
    pub hcheck: CMatrix,
    pub tau: usize,
    pub n_check: usize,
    pub singular_values: Vec<f64>,
    pub rank_tolerance: f64,
}

impl EquivalentChannel {
    /// Wraps an explicit full-row-rank matrix (e.g. read from a file).
    pub fn from_matrix(hcheck: CMatrix, rank_tolerance: f64) -> Result<Self> {
        let (tau, n_check) = hcheck.shape();
        if tau == 0 || n_check == 0 {
            return Err(input_error("equivalent channel must be nonempty"));
        }
        if tau > n_check {
            return Err(input_error(format!("equivalent channel is {tau}x{n_check}; rows must not exceed columns")));
        }
        if hcheck.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(input_error("equivalent channel has non-finite entries"));
        }
        let singular_values = crate::linalg::singular_values(&hcheck);
        let smax = singular_values[0];
        if smax <= DEGENERATE_SIGMA {
            return Err(Error::DegenerateChannel { sigma_max: smax });
        }
        if singular_values[tau - 1] <= rank_tolerance * smax {
            return Err(input_error(format!(
                "matrix rows are not linearly independent (σ_min/σ_max = {:.3e})",
                singular_values[tau - 1] / smax
            )));
        }
        Ok(Self { hcheck, tau, n_check, singular_values, rank_tolerance })
    }
}

pub fn reduce_to_equivalent(ch: &ChannelRealization, rank_tolerance: f64) -> Result<EquivalentChannel> {
    reduce_with_left_factor(ch, rank_tolerance).map(|(eq, _)| eq)
}

/// As [`reduce_to_equivalent`], also returning the left factor `U_τ`
/// (`n_R × τ`) with `G ≈ U_τ·Ȟ`.
pub fn reduce_with_left_factor(ch: &ChannelRealization, rank_tolerance: f64) -> Result<(EquivalentChannel, CMatrix)> {
    if !(rank_tolerance.is_finite() && rank_tolerance >= 0.0) {
        return Err(input_error(format!("rank tolerance must be finite and nonnegative, got {rank_tolerance}")));
    }
    let gmat = ch.augmented();
    if gmat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(input_error("channel gains must be finite"));
    }
    let n_check = gmat.ncols();
    let svd = gmat.svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma_max = svd.singular_values[order[0]];
    if sigma_max <= DEGENERATE_SIGMA {
        return Err(Error::DegenerateChannel { sigma_max });
    }
    let kept: Vec<usize> = order
        .into_iter()
        .take_while(|&i| svd.singular_values[i] > rank_tolerance * sigma_max)
        .collect();
    let tau = kept.len();

    let mut hcheck = CMatrix::zeros(tau, n_check);
    let mut left = CMatrix::zeros(u.nrows(), tau);
    let mut singular_values = Vec::with_capacity(tau);
    for (row, &i) in kept.iter().enumerate() {
        let s = svd.singular_values[i];
        singular_values.push(s);
        for j in 0..n_check {
            hcheck[(row, j)] = v_t[(i, j)] * s;
        }
        left.set_column(row, &u.column(i));
    }
    Ok((EquivalentChannel { hcheck, tau, n_check, singular_values, rank_tolerance }, left))
}

/// JSON layout for a channel drop; complex values as `[re, im]`, `H`
/// flattened row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDump {
    #[serde(rename = "n_R")]
    pub n_r: usize,
    pub n: usize,
    pub grid: RisGrid,
    pub attenuation: AttenuationSpec,
    #[serde(rename = "H")]
    pub h: Vec<Pair>,
    pub g: Vec<Pair>,
    pub d: Vec<Pair>,
    pub seed: u64,
}

impl From<&ChannelRealization> for ChannelDump {
    fn from(ch: &ChannelRealization) -> Self {
        let h = (0..ch.n_r())
            .flat_map(|i| (0..ch.n()).map(move |j| (i, j)))
            .map(|(i, j)| to_pair(ch.h[(i, j)]))
            .collect();
        ChannelDump {
            n_r: ch.n_r(),
            n: ch.n(),
            grid: ch.grid.clone(),
            attenuation: ch.attenuation,
            h,
            g: ch.g.iter().copied().map(to_pair).collect(),
            d: ch.d.iter().copied().map(to_pair).collect(),
            seed: ch.seed,
        }
    }
}

impl TryFrom<ChannelDump> for ChannelRealization {
    type Error = Error;
    fn try_from(dump: ChannelDump) -> Result<Self> {
        let (n_r, n) = (dump.n_r, dump.n);
        if dump.grid.len() != n {
            return Err(input_error(format!("grid has {} elements but n = {n}", dump.grid.len())));
        }
        if dump.h.len() != n_r * n || dump.g.len() != n || dump.d.len() != n_r {
            return Err(input_error(format!(
                "inconsistent channel dump: |H| = {}, |g| = {}, |d| = {} for n_R = {n_r}, n = {n}",
                dump.h.len(),
                dump.g.len(),
                dump.d.len()
            )));
        }
        Ok(ChannelRealization {
            h: CMatrix::from_fn(n_r, n, |i, j| from_pair(dump.h[i * n + j])),
            g: dump.g.into_iter().map(from_pair).collect(),
            d: dump.d.into_iter().map(from_pair).collect(),
            seed: dump.seed,
            grid: dump.grid,
            attenuation: dump.attenuation,
        })
    }
}
