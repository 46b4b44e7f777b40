//! Two-hidden-layer perceptron with hand-written batched backward pass.
//!
//! Layout: input -> hidden -> hidden -> output, leaky-rectifier activations
//! between layers, linear output. Weight matrices are row-major
//! (out_dim x in_dim). The output layer starts at zero so a freshly built
//! coupling block is the identity.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{gemm_nn_acc, gemm_nt_into, gemm_tn_acc};

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub in_dim: usize,
    pub hidden: usize,
    pub out_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
}

pub struct MlpCache {
    input: Vec<f64>,
    pre1: Vec<f64>,
    act1: Vec<f64>,
    pre2: Vec<f64>,
    act2: Vec<f64>,
    rows: usize,
}

#[inline]
fn leaky(v: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        LEAKY_SLOPE * v
    }
}

#[inline]
fn leaky_grad(pre: f64) -> f64 {
    if pre >= 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// y = x W^T + b for row-major W (out x in), batched over rows of x.
fn linear_forward(x: &[f64], rows: usize, in_dim: usize, w: &[f64], b: &[f64], out_dim: usize) -> Vec<f64> {
    let mut y = vec![0.0; rows * out_dim];
    gemm_nt_into(x, w, Some(b), &mut y, rows, in_dim, out_dim);
    y
}

/// dx = dy W; dw += dy^T x; db += column sums of dy.
fn linear_backward(
    x: &[f64],
    rows: usize,
    in_dim: usize,
    w: &[f64],
    out_dim: usize,
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; rows * in_dim];
    gemm_nn_acc(dy, w, &mut dx, rows, out_dim, in_dim);
    gemm_tn_acc(dy, x, dw, out_dim, rows, in_dim);
    for r in 0..rows {
        for (o, d) in db.iter_mut().enumerate() {
            *d += dy[r * out_dim + o];
        }
    }
    dx
}

impl Mlp {
    /// Hidden layers get scaled random weights, the output layer is zero.
    pub fn new(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let he = |fan_in: usize| (2.0 / fan_in as f64).sqrt();
        let s1 = he(in_dim);
        let s2 = he(hidden);
        Self {
            in_dim,
            hidden,
            out_dim,
            w1: (0..hidden * in_dim)
                .map(|_| rng.random_range(-s1..s1))
                .collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden * hidden)
                .map(|_| rng.random_range(-s2..s2))
                .collect(),
            b2: vec![0.0; hidden],
            w3: vec![0.0; out_dim * hidden],
            b3: vec![0.0; out_dim],
        }
    }

    pub fn zeros_like(&self) -> MlpGrads {
        MlpGrads {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
            w3: vec![0.0; self.w3.len()],
            b3: vec![0.0; self.b3.len()],
        }
    }

    /// Overwrite every tensor with small random values (tests and gradient
    /// checks want non-trivial outputs everywhere).
    pub fn randomize(&mut self, rng: &mut ChaCha8Rng, scale: f64) {
        for w in [&mut self.w1, &mut self.w2, &mut self.w3] {
            for v in w.iter_mut() {
                *v = rng.random_range(-scale..scale);
            }
        }
        for b in [&mut self.b1, &mut self.b2, &mut self.b3] {
            for v in b.iter_mut() {
                *v = rng.random_range(-scale..scale);
            }
        }
    }

    pub fn forward_batch(&self, x: &[f64], rows: usize) -> (Vec<f64>, MlpCache) {
        debug_assert_eq!(x.len(), rows * self.in_dim);
        let pre1 = linear_forward(x, rows, self.in_dim, &self.w1, &self.b1, self.hidden);
        let act1: Vec<f64> = pre1.iter().map(|&v| leaky(v)).collect();
        let pre2 = linear_forward(&act1, rows, self.hidden, &self.w2, &self.b2, self.hidden);
        let act2: Vec<f64> = pre2.iter().map(|&v| leaky(v)).collect();
        let out = linear_forward(&act2, rows, self.hidden, &self.w3, &self.b3, self.out_dim);
        (
            out,
            MlpCache {
                input: x.to_vec(),
                pre1,
                act1,
                pre2,
                act2,
                rows,
            },
        )
    }

    /// Inference-only forward without caching.
    pub fn forward_nocache(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let pre1 = linear_forward(x, rows, self.in_dim, &self.w1, &self.b1, self.hidden);
        let act1: Vec<f64> = pre1.iter().map(|&v| leaky(v)).collect();
        let pre2 = linear_forward(&act1, rows, self.hidden, &self.w2, &self.b2, self.hidden);
        let act2: Vec<f64> = pre2.iter().map(|&v| leaky(v)).collect();
        linear_forward(&act2, rows, self.hidden, &self.w3, &self.b3, self.out_dim)
    }

    /// Accumulates parameter gradients into `grads` and returns the input
    /// gradient.
    pub fn backward_batch(&self, cache: &MlpCache, dout: &[f64], grads: &mut MlpGrads) -> Vec<f64> {
        let rows = cache.rows;
        let dact2 = linear_backward(
            &cache.act2,
            rows,
            self.hidden,
            &self.w3,
            self.out_dim,
            dout,
            &mut grads.w3,
            &mut grads.b3,
        );
        let dpre2: Vec<f64> = dact2
            .iter()
            .zip(&cache.pre2)
            .map(|(&d, &p)| d * leaky_grad(p))
            .collect();
        let dact1 = linear_backward(
            &cache.act1,
            rows,
            self.hidden,
            &self.w2,
            self.hidden,
            &dpre2,
            &mut grads.w2,
            &mut grads.b2,
        );
        let dpre1: Vec<f64> = dact1
            .iter()
            .zip(&cache.pre1)
            .map(|(&d, &p)| d * leaky_grad(p))
            .collect();
        linear_backward(
            &cache.input,
            rows,
            self.in_dim,
            &self.w1,
            self.hidden,
            &dpre1,
            &mut grads.w1,
            &mut grads.b1,
        )
    }

    pub fn visit<'a>(&'a self, out: &mut Vec<&'a Vec<f64>>) {
        out.extend([&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]);
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Vec<f64>>) {
        out.extend([
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]);
    }
}

impl MlpGrads {
    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Vec<f64>>) {
        out.extend([
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]);
    }
}
