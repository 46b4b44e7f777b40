//! Learned invertible feature-mixing layer in PLU form.
//!
//! The layer computes y = P L U v with a fixed permutation P, a learned
//! unit-lower-triangular L, and a learned upper-triangular U whose diagonal
//! stays away from zero, so the inverse is exact triangular solving. On a
//! flat feature vector this is what a 1x1 convolution does on channels.
//!
//! Storage is row-packed: `l` holds the strict lower rows (row i has i
//! entries), `u` the upper rows including the diagonal (row i has n - i
//! entries). The permutation scatters z into the output, `y[perm[i]] = z[i]`.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::par;

/// Diagonal magnitude floor keeping U exactly invertible.
pub const DIAG_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Mixer {
    pub n: usize,
    pub perm: Vec<u32>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MixerGrads {
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

pub struct MixerCache {
    /// Layer input, B x N.
    v: Vec<f64>,
    /// Intermediate w = U v, B x N.
    w: Vec<f64>,
    rows: usize,
}

fn l_row(l: &[f64], i: usize) -> &[f64] {
    let off = i * (i - 1) / 2;
    &l[off..off + i]
}

fn u_row(u: &[f64], i: usize, n: usize) -> &[f64] {
    let off = i * n - i * (i - 1) / 2;
    &u[off..off + n - i]
}

fn u_row_mut(u: &mut [f64], i: usize, n: usize) -> &mut [f64] {
    let off = i * n - i * (i - 1) / 2;
    &mut u[off..off + n - i]
}

impl Mixer {
    /// Identity mixing: P = id, L = U = I.
    pub fn identity(n: usize) -> Self {
        let mut u = vec![0.0; n * (n + 1) / 2];
        for i in 0..n {
            u_row_mut(&mut u, i, n)[0] = 1.0;
        }
        Self {
            n,
            perm: (0..n as u32).collect(),
            l: vec![0.0; n * (n - 1) / 2],
            u,
        }
    }

    /// Training initialization: a random permutation with L = U = I, so the
    /// layer starts as a pure feature reordering.
    pub fn new_random_perm(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut mixer = Self::identity(n);
        mixer.perm.shuffle(rng);
        mixer
    }

    /// Fill L and U with random well-conditioned values (tests and gradient
    /// checks). Off-diagonal magnitudes shrink with n to keep the triangular
    /// solves stable.
    pub fn randomize(&mut self, rng: &mut ChaCha8Rng, scale: f64) {
        use rand::Rng;
        let n = self.n;
        let s = scale / (n as f64).sqrt();
        for v in self.l.iter_mut() {
            *v = rng.random_range(-s..s);
        }
        for i in 0..n {
            let row = u_row_mut(&mut self.u, i, n);
            row[0] = rng.random_range(0.5..1.5) * if rng.random_range(0..2) == 0 { -1.0 } else { 1.0 };
            for v in row.iter_mut().skip(1) {
                *v = rng.random_range(-s..s);
            }
        }
    }

    pub fn dims_ok(&self) -> bool {
        let n = self.n;
        self.perm.len() == n
            && self.l.len() == n * (n - 1) / 2
            && self.u.len() == n * (n + 1) / 2
    }

    /// Clamp |U_ii| below the floor back to the floor (sign preserved);
    /// returns how many entries were clamped.
    pub fn enforce_diag_floor(&mut self) -> usize {
        let n = self.n;
        let mut clamped = 0;
        for i in 0..n {
            let d = &mut u_row_mut(&mut self.u, i, n)[0];
            if d.abs() < DIAG_FLOOR {
                *d = if *d < 0.0 { -DIAG_FLOOR } else { DIAG_FLOOR };
                clamped += 1;
            }
        }
        clamped
    }

    fn forward_row(&self, v: &[f64], w: &mut [f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            w[i] = dot(u_row(&self.u, i, n), &v[i..]);
        }
        for i in 0..n {
            let mut acc = w[i];
            if i > 0 {
                acc += dot(l_row(&self.l, i), &w[..i]);
            }
            out[self.perm[i] as usize] = acc;
        }
    }

    fn inverse_row(&self, y: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut z = vec![0.0; n];
        for i in 0..n {
            z[i] = y[self.perm[i] as usize];
        }
        // L w = z, unit diagonal.
        let mut w = z;
        for i in 1..n {
            let (head, tail) = w.split_at_mut(i);
            tail[0] -= dot(l_row(&self.l, i), head);
        }
        // U v = w.
        for i in (0..n).rev() {
            let row = u_row(&self.u, i, n);
            let acc = w[i] - dot(&row[1..], &out[i + 1..]);
            out[i] = acc / row[0];
        }
    }

    pub fn forward_batch(&self, v: &[f64], rows: usize) -> (Vec<f64>, MixerCache) {
        let n = self.n;
        let mut out = vec![0.0; rows * n];
        let mut w = vec![0.0; rows * n];
        par::for_each_row_pair_mut(&mut out, n, &mut w, n, |r, orow, wrow| {
            self.forward_row(&v[r * n..(r + 1) * n], wrow, orow);
        });
        (
            out,
            MixerCache {
                v: v.to_vec(),
                w,
                rows,
            },
        )
    }

    pub fn forward_nocache(&self, v: &[f64], rows: usize) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; rows * n];
        par::for_each_row_mut(&mut out, n, |r, orow| {
            let mut w = vec![0.0; n];
            self.forward_row(&v[r * n..(r + 1) * n], &mut w, orow);
        });
        out
    }

    pub fn inverse_batch(&self, y: &[f64], rows: usize) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; rows * n];
        par::for_each_row_mut(&mut out, n, |r, orow| {
            self.inverse_row(&y[r * n..(r + 1) * n], orow);
        });
        out
    }

    /// Reverse-mode step: accumulates dL, dU and returns dv.
    pub fn backward_batch(
        &self,
        cache: &MixerCache,
        dy: &[f64],
        grads: &mut MixerGrads,
    ) -> Vec<f64> {
        let n = self.n;
        let rows = cache.rows;
        // dz (B x N) gathered through the permutation, then dw = L^T dz.
        let mut dz = vec![0.0; rows * n];
        par::for_each_row_mut(&mut dz, n, |r, zrow| {
            let dyrow = &dy[r * n..(r + 1) * n];
            for i in 0..n {
                zrow[i] = dyrow[self.perm[i] as usize];
            }
        });
        let mut dw = vec![0.0; rows * n];
        par::for_each_row_mut(&mut dw, n, |r, wrow| {
            let zrow = &dz[r * n..(r + 1) * n];
            wrow.copy_from_slice(zrow);
            for i in 1..n {
                let g = zrow[i];
                if g == 0.0 {
                    continue;
                }
                axpy(g, l_row(&self.l, i), &mut wrow[..i]);
            }
        });
        // dL[i][j] = sum_b dz[b,i] w[b,j]; rows of packed L are contiguous.
        let l_lens: Vec<usize> = (0..n).map(|i| i).collect();
        par::for_each_packed_row_mut(&mut grads.l, &l_lens, |i, lrow| {
            if i == 0 {
                return;
            }
            for r in 0..rows {
                let g = dz[r * n + i];
                if g == 0.0 {
                    continue;
                }
                axpy(g, &cache.w[r * n..r * n + i], lrow);
            }
        });
        // dU[i][j>=i] = sum_b dw[b,i] v[b,j].
        let u_lens: Vec<usize> = (0..n).map(|i| n - i).collect();
        par::for_each_packed_row_mut(&mut grads.u, &u_lens, |i, urow| {
            for r in 0..rows {
                let g = dw[r * n + i];
                if g == 0.0 {
                    continue;
                }
                axpy(g, &cache.v[r * n + i..(r + 1) * n], urow);
            }
        });
        // dv = U^T dw.
        let mut dv = vec![0.0; rows * n];
        par::for_each_row_mut(&mut dv, n, |r, vrow| {
            let wrow = &dw[r * n..(r + 1) * n];
            for i in 0..n {
                let g = wrow[i];
                if g == 0.0 {
                    continue;
                }
                axpy(g, u_row(&self.u, i, n), &mut vrow[i..]);
            }
        });
        dv
    }

    pub fn zeros_like(&self) -> MixerGrads {
        MixerGrads {
            l: vec![0.0; self.l.len()],
            u: vec![0.0; self.u.len()],
        }
    }

    /// Dense n x n matrix P L U (for oracles and diagnostics).
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut lu = vec![0.0; n * n];
        // L U product.
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                // (L)_{i,k} (U)_{k,j}: k <= i, k <= j.
                for k in 0..=i.min(j) {
                    let lv = if k == i { 1.0 } else { l_row(&self.l, i)[k] };
                    let uv = if j >= k { u_row(&self.u, k, n)[j - k] } else { 0.0 };
                    acc += lv * uv;
                }
                lu[i * n + j] = acc;
            }
        }
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let pi = self.perm[i] as usize;
            out[pi * n..pi * n + n].copy_from_slice(&lu[i * n..i * n + n]);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dims_ok() {
            return Err(Error::Format("mixer dimensions inconsistent".into()));
        }
        for i in 0..self.n {
            if u_row(&self.u, i, self.n)[0].abs() < DIAG_FLOOR {
                return Err(Error::Numerical(format!(
                    "mixer diagonal {i} below the invertibility floor"
                )));
            }
        }
        Ok(())
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<&'a Vec<f64>>) {
        out.extend([&self.l, &self.u]);
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Vec<f64>>) {
        out.extend([&mut self.l, &mut self.u]);
    }
}

impl MixerGrads {
    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Vec<f64>>) {
        out.extend([&mut self.l, &mut self.u]);
    }
}
