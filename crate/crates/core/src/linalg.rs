//! Complex matrix helpers on top of `nalgebra`.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::Rng;

use crate::rng::complex_normal;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Complex number as it appears in every JSON dump: `[re, im]`.
pub type Pair = [f64; 2];

pub fn to_pair(z: C64) -> Pair {
    [z.re, z.im]
}

pub fn from_pair(p: Pair) -> C64 {
    C64::new(p[0], p[1])
}

/// Row-major nested `[[[re, im], ...], ...]` representation.
pub fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<Pair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| to_pair(m[(i, j)])).collect())
        .collect()
}

/// Inverse of [`matrix_to_rows`]; `None` if rows are ragged or empty.
pub fn matrix_from_rows(rows: &[Vec<Pair>]) -> Option<CMatrix> {
    let nrows = rows.len();
    let ncols = rows.first()?.len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(CMatrix::from_fn(nrows, ncols, |i, j| from_pair(rows[i][j])))
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest entrywise deviation of `Bᴴ·B` from the identity.
pub fn unitarity_defect(b: &CMatrix) -> f64 {
    let g = b.adjoint() * b;
    let mut worst = 0.0_f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Columns of `m` reordered so that column `j` of the result is column
/// `perm[j]` of `m`, i.e. `m·P`.
pub fn permute_columns(m: &CMatrix, perm: &[usize]) -> CMatrix {
    CMatrix::from_fn(m.nrows(), perm.len(), |i, j| m[(i, perm[j])])
}

/// Inverse of [`permute_columns`]: `m·Pᴴ`.
pub fn unpermute_columns(m: &CMatrix, perm: &[usize]) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), perm.len());
    for (j, &src) in perm.iter().enumerate() {
        out.set_column(src, &m.column(j));
    }
    out
}

/// Phase factor `z/|z|`, or 1 for `z = 0`.
pub fn unit_phase(z: C64) -> C64 {
    let r = z.norm();
    if r > 0.0 {
        z / r
    } else {
        C64::new(1.0, 0.0)
    }
}

/// Haar-distributed `dim × dim` unitary: QR of an i.i.d. complex Gaussian
/// matrix with the phases of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let z = CMatrix::from_fn(dim, dim, |_, _| complex_normal(rng));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let ph = unit_phase(r[(j, j)]);
        for i in 0..dim {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Extends the orthonormal columns of `basis` (`dim × k`) to a `dim × dim`
/// unitary via QR of `[basis | Gaussian]`. The first `k` columns are kept
/// verbatim.
pub fn complete_unitary<R: Rng + ?Sized>(basis: &CMatrix, dim: usize, rng: &mut R) -> CMatrix {
    let k = basis.ncols();
    if k >= dim {
        return basis.clone();
    }
    let mut m = CMatrix::zeros(dim, dim);
    if k > 0 {
        m.columns_mut(0, k).copy_from(basis);
    }
    for j in k..dim {
        for i in 0..dim {
            m[(i, j)] = complex_normal(rng);
        }
    }
    let q = m.qr().q();
    let mut out = q;
    if k > 0 {
        out.columns_mut(0, k).copy_from(basis);
    }
    out
}

/// Singular values of `m`, sorted nonincreasing.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}
