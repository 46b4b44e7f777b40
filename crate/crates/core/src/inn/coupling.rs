//! Affine coupling block.
//!
//! The input splits into halves [u1, u2] (sizes ceil(n/2) and floor(n/2));
//! the halves are transformed alternately by four subnetworks, two scale
//! nets (tanh-clamped to [-s_clamp, s_clamp]) and two translation nets:
//!
//! ```text
//! v1 = u1 .* exp(s2(u2)) + t2(u2)
//! v2 = u2 .* exp(s1(v1)) + t1(v1)
//! ```
//!
//! The inverse unwinds the two affine steps exactly, so the block is
//! bijective whatever the subnetworks compute. Zero-initialized output
//! layers make a fresh block the identity.

use rand_chacha::ChaCha8Rng;

use super::mlp::{Mlp, MlpGrads};

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingBlock {
    pub n1: usize,
    pub n2: usize,
    pub s_clamp: f64,
    pub s1: Mlp,
    pub t1: Mlp,
    pub s2: Mlp,
    pub t2: Mlp,
}

#[derive(Debug, Clone)]
pub struct CouplingGrads {
    pub s1: MlpGrads,
    pub t1: MlpGrads,
    pub s2: MlpGrads,
    pub t2: MlpGrads,
}

pub struct CouplingCache {
    u1: Vec<f64>,
    u2: Vec<f64>,
    /// Clamped scales and their exponentials.
    s2c: Vec<f64>,
    e2: Vec<f64>,
    s1c: Vec<f64>,
    e1: Vec<f64>,
    s1_cache: super::mlp::MlpCache,
    t1_cache: super::mlp::MlpCache,
    s2_cache: super::mlp::MlpCache,
    t2_cache: super::mlp::MlpCache,
    rows: usize,
}

fn split_cols(x: &[f64], rows: usize, n1: usize, n2: usize) -> (Vec<f64>, Vec<f64>) {
    let n = n1 + n2;
    let mut a = Vec::with_capacity(rows * n1);
    let mut b = Vec::with_capacity(rows * n2);
    for r in 0..rows {
        a.extend_from_slice(&x[r * n..r * n + n1]);
        b.extend_from_slice(&x[r * n + n1..(r + 1) * n]);
    }
    (a, b)
}

fn concat_cols(a: &[f64], b: &[f64], rows: usize, n1: usize, n2: usize) -> Vec<f64> {
    let n = n1 + n2;
    let mut out = Vec::with_capacity(rows * n);
    for r in 0..rows {
        out.extend_from_slice(&a[r * n1..(r + 1) * n1]);
        out.extend_from_slice(&b[r * n2..(r + 1) * n2]);
    }
    out
}

impl CouplingBlock {
    pub fn new(n: usize, hidden: usize, s_clamp: f64, rng: &mut ChaCha8Rng) -> Self {
        let n1 = n.div_ceil(2);
        let n2 = n / 2;
        Self {
            n1,
            n2,
            s_clamp,
            s1: Mlp::new(n1, hidden, n2, rng),
            t1: Mlp::new(n1, hidden, n2, rng),
            s2: Mlp::new(n2, hidden, n1, rng),
            t2: Mlp::new(n2, hidden, n1, rng),
        }
    }

    pub fn randomize(&mut self, rng: &mut ChaCha8Rng, scale: f64) {
        self.s1.randomize(rng, scale);
        self.t1.randomize(rng, scale);
        self.s2.randomize(rng, scale);
        self.t2.randomize(rng, scale);
    }

    #[inline]
    fn clamp_scale(&self, raw: f64) -> f64 {
        self.s_clamp * raw.tanh()
    }

    /// d(clamped)/d(raw) expressed through the clamped value.
    #[inline]
    fn clamp_grad(&self, clamped: f64) -> f64 {
        let c = self.s_clamp;
        c - clamped * clamped / c
    }

    pub fn forward_batch(&self, u: &[f64], rows: usize) -> (Vec<f64>, CouplingCache) {
        let (u1, u2) = split_cols(u, rows, self.n1, self.n2);
        let (s2_raw, s2_cache) = self.s2.forward_batch(&u2, rows);
        let s2c: Vec<f64> = s2_raw.iter().map(|&r| self.clamp_scale(r)).collect();
        let e2: Vec<f64> = s2c.iter().map(|&s| s.exp()).collect();
        let (t2v, t2_cache) = self.t2.forward_batch(&u2, rows);
        let v1: Vec<f64> = u1
            .iter()
            .zip(e2.iter().zip(&t2v))
            .map(|(&uv, (&ev, &tv))| uv * ev + tv)
            .collect();
        let (s1_raw, s1_cache) = self.s1.forward_batch(&v1, rows);
        let s1c: Vec<f64> = s1_raw.iter().map(|&r| self.clamp_scale(r)).collect();
        let e1: Vec<f64> = s1c.iter().map(|&s| s.exp()).collect();
        let (t1v, t1_cache) = self.t1.forward_batch(&v1, rows);
        let v2: Vec<f64> = u2
            .iter()
            .zip(e1.iter().zip(&t1v))
            .map(|(&uv, (&ev, &tv))| uv * ev + tv)
            .collect();
        let out = concat_cols(&v1, &v2, rows, self.n1, self.n2);
        (
            out,
            CouplingCache {
                u1,
                u2,
                s2c,
                e2,
                s1c,
                e1,
                s1_cache,
                t1_cache,
                s2_cache,
                t2_cache,
                rows,
            },
        )
    }

    pub fn forward_nocache(&self, u: &[f64], rows: usize) -> Vec<f64> {
        let (u1, u2) = split_cols(u, rows, self.n1, self.n2);
        let s2_raw = self.s2.forward_nocache(&u2, rows);
        let t2v = self.t2.forward_nocache(&u2, rows);
        let v1: Vec<f64> = u1
            .iter()
            .zip(s2_raw.iter().zip(&t2v))
            .map(|(&uv, (&sr, &tv))| uv * self.clamp_scale(sr).exp() + tv)
            .collect();
        let s1_raw = self.s1.forward_nocache(&v1, rows);
        let t1v = self.t1.forward_nocache(&v1, rows);
        let v2: Vec<f64> = u2
            .iter()
            .zip(s1_raw.iter().zip(&t1v))
            .map(|(&uv, (&sr, &tv))| uv * self.clamp_scale(sr).exp() + tv)
            .collect();
        concat_cols(&v1, &v2, rows, self.n1, self.n2)
    }

    /// Exact algebraic inverse of [`Self::forward_batch`].
    pub fn inverse_batch(&self, v: &[f64], rows: usize) -> Vec<f64> {
        let (v1, v2) = split_cols(v, rows, self.n1, self.n2);
        let s1_raw = self.s1.forward_nocache(&v1, rows);
        let t1v = self.t1.forward_nocache(&v1, rows);
        let u2: Vec<f64> = v2
            .iter()
            .zip(s1_raw.iter().zip(&t1v))
            .map(|(&vv, (&sr, &tv))| (vv - tv) * (-self.clamp_scale(sr)).exp())
            .collect();
        let s2_raw = self.s2.forward_nocache(&u2, rows);
        let t2v = self.t2.forward_nocache(&u2, rows);
        let u1: Vec<f64> = v1
            .iter()
            .zip(s2_raw.iter().zip(&t2v))
            .map(|(&vv, (&sr, &tv))| (vv - tv) * (-self.clamp_scale(sr)).exp())
            .collect();
        concat_cols(&u1, &u2, rows, self.n1, self.n2)
    }

    pub fn backward_batch(
        &self,
        cache: &CouplingCache,
        dv: &[f64],
        grads: &mut CouplingGrads,
    ) -> Vec<f64> {
        let rows = cache.rows;
        let (dv1_in, dv2) = split_cols(dv, rows, self.n1, self.n2);

        // v2 = u2 .* e1 + t1(v1)
        let mut du2: Vec<f64> = dv2.iter().zip(&cache.e1).map(|(&d, &e)| d * e).collect();
        let ds1_raw: Vec<f64> = dv2
            .iter()
            .zip(cache.u2.iter().zip(cache.e1.iter().zip(&cache.s1c)))
            .map(|(&d, (&u, (&e, &s)))| d * u * e * self.clamp_grad(s))
            .collect();
        let dt1 = dv2;
        let mut dv1 = dv1_in;
        let from_s1 = self.s1.backward_batch(&cache.s1_cache, &ds1_raw, &mut grads.s1);
        let from_t1 = self.t1.backward_batch(&cache.t1_cache, &dt1, &mut grads.t1);
        for ((d, a), b) in dv1.iter_mut().zip(&from_s1).zip(&from_t1) {
            *d += a + b;
        }

        // v1 = u1 .* e2 + t2(u2)
        let du1: Vec<f64> = dv1.iter().zip(&cache.e2).map(|(&d, &e)| d * e).collect();
        let ds2_raw: Vec<f64> = dv1
            .iter()
            .zip(cache.u1.iter().zip(cache.e2.iter().zip(&cache.s2c)))
            .map(|(&d, (&u, (&e, &s)))| d * u * e * self.clamp_grad(s))
            .collect();
        let dt2 = dv1;
        let from_s2 = self.s2.backward_batch(&cache.s2_cache, &ds2_raw, &mut grads.s2);
        let from_t2 = self.t2.backward_batch(&cache.t2_cache, &dt2, &mut grads.t2);
        for ((d, a), b) in du2.iter_mut().zip(&from_s2).zip(&from_t2) {
            *d += a + b;
        }

        concat_cols(&du1, &du2, rows, self.n1, self.n2)
    }

    pub fn zeros_like(&self) -> CouplingGrads {
        CouplingGrads {
            s1: self.s1.zeros_like(),
            t1: self.t1.zeros_like(),
            s2: self.s2.zeros_like(),
            t2: self.t2.zeros_like(),
        }
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<&'a Vec<f64>>) {
        self.s1.visit(out);
        self.t1.visit(out);
        self.s2.visit(out);
        self.t2.visit(out);
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Vec<f64>>) {
        self.s1.visit_mut(out);
        self.t1.visit_mut(out);
        self.s2.visit_mut(out);
        self.t2.visit_mut(out);
    }
}

impl CouplingGrads {
    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Vec<f64>>) {
        self.s1.visit_mut(out);
        self.t1.visit_mut(out);
        self.s2.visit_mut(out);
        self.t2.visit_mut(out);
    }
}
