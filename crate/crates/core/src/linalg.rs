//! Small dense and banded linear-algebra kernels.
//!
//! Everything is `Vec<f64>` row-major. The sizes in this toolkit are modest
//! (systems up to a few thousand unknowns, Gram matrices around 100x100),
//! so straightforward loops beat pulling in a LAPACK binding.

use crate::error::{Error, Result};

/// Dot product with independent partial sums so the loop vectorizes; the
/// summation order is fixed, keeping results bitwise reproducible.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut acc = [0.0f64; 8];
    let chunks = n / 8;
    for i in 0..chunks {
        let j = i * 8;
        for lane in 0..8 {
            acc[lane] += a[j + lane] * b[j + lane];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for j in chunks * 8..n {
        s += a[j] * b[j];
    }
    s
}

/// y += alpha * x.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Row-tile height for the blocked matrix kernels below. Tiling keeps the
/// streamed operand in cache across a handful of output rows; every output
/// row is still produced by exactly one task in a fixed reduction order,
/// so results are bitwise reproducible.
pub const GEMM_TILE: usize = 8;

/// C (m x n) = A (m x k) * B^T + bias, with B given row-major as n x k.
/// Parallel over row tiles of C.
pub fn gemm_nt_into(
    a: &[f64],
    b: &[f64],
    bias: Option<&[f64]>,
    c: &mut [f64],
    m: usize,
    k: usize,
    n: usize,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    crate::par::for_each_chunk_mut(c, GEMM_TILE * n, |tile_idx, ctile| {
        let i0 = tile_idx * GEMM_TILE;
        let rows = ctile.len() / n;
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let base = bias.map_or(0.0, |bv| bv[j]);
            for r in 0..rows {
                ctile[r * n + j] = base + dot(&a[(i0 + r) * k..(i0 + r + 1) * k], brow);
            }
        }
    });
}

/// C (m x n) += A (m x k) * B (k x n), all row-major. Parallel over row
/// tiles of C.
pub fn gemm_nn_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    crate::par::for_each_chunk_mut(c, GEMM_TILE * n, |tile_idx, ctile| {
        let i0 = tile_idx * GEMM_TILE;
        let rows = ctile.len() / n;
        for kk in 0..k {
            let brow = &b[kk * n..(kk + 1) * n];
            for r in 0..rows {
                let alpha = a[(i0 + r) * k + kk];
                if alpha != 0.0 {
                    axpy(alpha, brow, &mut ctile[r * n..(r + 1) * n]);
                }
            }
        }
    });
}

/// C (m x n) += A^T * B where A is k x m and B is k x n, both row-major.
/// Parallel over row tiles of C.
pub fn gemm_tn_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    crate::par::for_each_chunk_mut(c, GEMM_TILE * n, |tile_idx, ctile| {
        let i0 = tile_idx * GEMM_TILE;
        let rows = ctile.len() / n;
        for kk in 0..k {
            let brow = &b[kk * n..(kk + 1) * n];
            let arow = &a[kk * m..(kk + 1) * m];
            for r in 0..rows {
                let alpha = arow[i0 + r];
                if alpha != 0.0 {
                    axpy(alpha, brow, &mut ctile[r * n..(r + 1) * n]);
                }
            }
        }
    });
}

/// y = A x for row-major A (rows x cols).
pub fn matvec(a: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(y.len(), rows);
    for (r, out) in y.iter_mut().enumerate() {
        *out = dot(&a[r * cols..(r + 1) * cols], x);
    }
}

/// In-place Cholesky factorization A = L L^T of a dense SPD matrix.
/// On return the lower triangle of `a` holds L; the strict upper triangle
/// is left untouched and must be ignored by the solves below.
pub fn cholesky_factor(a: &mut [f64], n: usize) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::Numerical(format!(
                "cholesky pivot {diag:.3e} at column {j}: matrix not positive definite"
            )));
        }
        let ljj = diag.sqrt();
        a[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / ljj;
        }
    }
    Ok(())
}

/// Solve A x = b given the Cholesky factor from [`cholesky_factor`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    debug_assert_eq!(b.len(), n);
    // L y = b
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * n + k] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
    // L^T x = y
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..n {
            v -= l[k * n + i] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
}

/// Symmetric banded matrix in lower-band storage: `band[i][k] = A[i, i-k]`
/// for `k = 0..=bw`, entries with `k > i` unused. Used by the conduction
/// solver, where the bandwidth equals the grid's y-extent.
pub struct BandedSpd {
    pub n: usize,
    pub bw: usize,
    pub band: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            band: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        if k > self.bw {
            0.0
        } else {
            self.band[hi * (self.bw + 1) + k]
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        debug_assert!(k <= self.bw, "entry outside band");
        self.band[hi * (self.bw + 1) + k] += v;
    }

    /// y = A x using the symmetric band.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let bw = self.bw;
        y.fill(0.0);
        for i in 0..self.n {
            let row = &self.band[i * (bw + 1)..(i + 1) * (bw + 1)];
            y[i] += row[0] * x[i];
            let kmax = bw.min(i);
            for k in 1..=kmax {
                let j = i - k;
                y[i] += row[k] * x[j];
                y[j] += row[k] * x[i];
            }
        }
    }

    /// Banded Cholesky factorization; returns the factor in the same band layout.
    pub fn cholesky(&self) -> Result<BandedChol> {
        let n = self.n;
        let bw = self.bw;
        let mut l = self.band.clone();
        for i in 0..n {
            let jmin = i.saturating_sub(bw);
            for j in jmin..=i {
                let mut sum = l[i * (bw + 1) + (i - j)];
                let pmin = jmin.max(j.saturating_sub(bw));
                for p in pmin..j {
                    sum -= l[i * (bw + 1) + (i - p)] * l[j * (bw + 1) + (j - p)];
                }
                if j < i {
                    sum /= l[j * (bw + 1)];
                    l[i * (bw + 1) + (i - j)] = sum;
                } else {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(Error::Numerical(format!(
                            "banded cholesky pivot {sum:.3e} at row {i}"
                        )));
                    }
                    l[i * (bw + 1)] = sum.sqrt();
                }
            }
        }
        Ok(BandedChol { n, bw, band: l })
    }
}

pub struct BandedChol {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedChol {
    /// Solve A x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        // L y = b
        for i in 0..n {
            let mut v = b[i];
            let kmax = bw.min(i);
            for k in 1..=kmax {
                v -= self.band[i * (bw + 1) + k] * b[i - k];
            }
            b[i] = v / self.band[i * (bw + 1)];
        }
        // L^T x = y
        for i in (0..n).rev() {
            let mut v = b[i];
            let kmax = bw.min(n - 1 - i);
            for k in 1..=kmax {
                v -= self.band[(i + k) * (bw + 1) + k] * b[i + k];
            }
            b[i] = v / self.band[i * (bw + 1)];
        }
    }
}
