//! Invertible network between map-space (dimension N) and
//! [reading, latent]-space (dimension M + D = N).
//!
//! The model is k coupling blocks, each followed by an invertible mixing
//! layer. The map direction ([y, z] -> x, the direction training
//! optimizes) applies block then mixer for every stage; the measurement
//! direction (x -> [y, z]) unwinds them in reverse. At identity
//! initialization the model is the identity, so x equals the [y, z]
//! concatenation.
//!
//! The training loss is the root of the batch-mean squared residual norm,
//! L = sqrt(1/W sum_i |x_i - xhat_i|^2), differentiated by hand through
//! the whole stack; [`gradient_check`] validates those gradients against
//! central finite differences on small models.
//!
//! # Checkpoint format (`BINN`, version 1, little-endian)
//!
//! magic, u32 version, u64 N, u64 M, u64 k, u64 hidden, f64 s_clamp,
//! k * N u32 mixer permutations, u64 parameter count, then all parameter
//! tensors as f64 in visitor order -- per stage i: coupling block i's
//! subnets s1, t1, s2, t2 (each w1, b1, w2, b2, w3, b3), then mixer i's
//! packed strict-lower L and packed upper U -- and a JSON training
//! fingerprint.

pub mod coupling;
pub mod mixer;
pub mod mlp;
pub mod train;

use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::io::{read_file, Reader, Writer};
use crate::seeds;

pub use coupling::{CouplingBlock, CouplingGrads};
pub use mixer::{Mixer, MixerGrads};
pub use train::{train, EpochRecord, StopReason, TrainConfig, TrainOutcome, TrainSet};

#[derive(Debug, Clone, PartialEq)]
pub struct InnModel {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub hidden: usize,
    pub s_clamp: f64,
    pub blocks: Vec<CouplingBlock>,
    pub mixers: Vec<Mixer>,
}

pub struct InnGrads {
    pub blocks: Vec<CouplingGrads>,
    pub mixers: Vec<MixerGrads>,
}

pub struct ForwardCaches {
    blocks: Vec<coupling::CouplingCache>,
    mixers: Vec<mixer::MixerCache>,
}

fn check_dims(n: usize, m: usize, k: usize, hidden: usize) -> Result<()> {
    if m == 0 || n <= m {
        return Err(Error::Config(format!(
            "latent dimension D = N - M must be positive (N = {n}, M = {m})"
        )));
    }
    if k == 0 || hidden == 0 {
        return Err(Error::Config("k and hidden must be positive".into()));
    }
    Ok(())
}

impl InnModel {
    /// Latent dimensionality D = N - M.
    pub fn d(&self) -> usize {
        self.n - self.m
    }

    /// Identity model: every subnet tensor zero, every mixer the identity.
    pub fn identity(n: usize, m: usize, k: usize, hidden: usize, s_clamp: f64) -> Result<Self> {
        check_dims(n, m, k, hidden)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let blocks = (0..k)
            .map(|_| {
                let mut b = CouplingBlock::new(n, hidden, s_clamp, &mut rng);
                let mut refs = Vec::new();
                b.visit_mut(&mut refs);
                for t in refs {
                    t.fill(0.0);
                }
                b
            })
            .collect();
        let mixers = (0..k).map(|_| Mixer::identity(n)).collect();
        Ok(Self {
            n,
            m,
            k,
            hidden,
            s_clamp,
            blocks,
            mixers,
        })
    }

    /// Training initialization: random hidden layers with zero output
    /// layers (each block starts as identity) and random-permutation
    /// mixers with L = U = I.
    pub fn new(n: usize, m: usize, k: usize, hidden: usize, s_clamp: f64, seed: u64) -> Result<Self> {
        check_dims(n, m, k, hidden)?;
        let mut rng = seeds::rng(seed, seeds::STREAM_INIT, 0);
        let blocks = (0..k)
            .map(|_| CouplingBlock::new(n, hidden, s_clamp, &mut rng))
            .collect();
        let mixers = (0..k)
            .map(|_| Mixer::new_random_perm(n, &mut rng))
            .collect();
        Ok(Self {
            n,
            m,
            k,
            hidden,
            s_clamp,
            blocks,
            mixers,
        })
    }

    /// Randomize every learned tensor (tests, invertibility suites,
    /// gradient checks).
    pub fn randomize(&mut self, seed: u64, scale: f64) {
        let mut rng = seeds::rng(seed, seeds::STREAM_INIT, 1);
        for b in &mut self.blocks {
            b.randomize(&mut rng, scale);
        }
        for mx in &mut self.mixers {
            mx.randomize(&mut rng, scale);
        }
    }

    fn check_finite(v: &[f64], stage: usize, what: &str) -> Result<()> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite values after {what} of stage {stage}"
            )));
        }
        Ok(())
    }

    /// Map direction with caches for the backward pass: [y, z] rows -> x rows.
    pub fn toward_x_batch(&self, yz: &[f64], rows: usize) -> Result<(Vec<f64>, ForwardCaches)> {
        debug_assert_eq!(yz.len(), rows * self.n);
        let mut caches = ForwardCaches {
            blocks: Vec::with_capacity(self.k),
            mixers: Vec::with_capacity(self.k),
        };
        let mut v = yz.to_vec();
        for i in 0..self.k {
            let (out, bc) = self.blocks[i].forward_batch(&v, rows);
            Self::check_finite(&out, i, "coupling block")?;
            caches.blocks.push(bc);
            let (out2, mc) = self.mixers[i].forward_batch(&out, rows);
            Self::check_finite(&out2, i, "mixer")?;
            caches.mixers.push(mc);
            v = out2;
        }
        Ok((v, caches))
    }

    /// Map direction without caches (inference).
    pub fn toward_x_nocache(&self, yz: &[f64], rows: usize) -> Result<Vec<f64>> {
        let mut v = yz.to_vec();
        for i in 0..self.k {
            v = self.blocks[i].forward_nocache(&v, rows);
            Self::check_finite(&v, i, "coupling block")?;
            v = self.mixers[i].forward_nocache(&v, rows);
            Self::check_finite(&v, i, "mixer")?;
        }
        Ok(v)
    }

    /// Measurement direction: x rows -> [y, z] rows.
    pub fn toward_yz_batch(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let mut v = x.to_vec();
        for i in (0..self.k).rev() {
            v = self.mixers[i].inverse_batch(&v, rows);
            v = self.blocks[i].inverse_batch(&v, rows);
        }
        v
    }

    /// Single-vector reconstruction x = f(y, z).
    pub fn inverse_map(&self, y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.m || z.len() != self.d() {
            return Err(Error::ShapeMismatch {
                context: "inverse_map inputs".into(),
                expected: format!("y length {}, z length {}", self.m, self.d()),
                found: format!("y length {}, z length {}", y.len(), z.len()),
            });
        }
        let mut yz = Vec::with_capacity(self.n);
        yz.extend_from_slice(y);
        yz.extend_from_slice(z);
        self.toward_x_nocache(&yz, 1)
    }

    /// Single-vector measurement map; returns (y, z).
    pub fn forward_map(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.n {
            return Err(Error::ShapeMismatch {
                context: "forward_map input".into(),
                expected: format!("length {}", self.n),
                found: format!("length {}", x.len()),
            });
        }
        let yz = self.toward_yz_batch(x, 1);
        Ok((yz[..self.m].to_vec(), yz[self.m..].to_vec()))
    }

    /// Reverse-mode pass through the map direction; fills `grads` and
    /// returns the gradient with respect to the [y, z] input.
    pub fn backward_from_x(
        &self,
        caches: &ForwardCaches,
        dx: &[f64],
        grads: &mut InnGrads,
    ) -> Vec<f64> {
        let mut dv = dx.to_vec();
        for i in (0..self.k).rev() {
            dv = self.mixers[i].backward_batch(&caches.mixers[i], &dv, &mut grads.mixers[i]);
            dv = self.blocks[i].backward_batch(&caches.blocks[i], &dv, &mut grads.blocks[i]);
        }
        dv
    }

    pub fn zeros_like(&self) -> InnGrads {
        InnGrads {
            blocks: self.blocks.iter().map(|b| b.zeros_like()).collect(),
            mixers: self.mixers.iter().map(|m| m.zeros_like()).collect(),
        }
    }

    /// All learned tensors in the documented fixed order.
    pub fn visit<'a>(&'a self, out: &mut Vec<&'a Vec<f64>>) {
        for i in 0..self.k {
            self.blocks[i].visit(out);
            self.mixers[i].visit(out);
        }
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Vec<f64>>) {
        // Split borrows: blocks and mixers are distinct fields.
        let k = self.k;
        let (blocks, mixers) = (&mut self.blocks, &mut self.mixers);
        let mut block_refs: Vec<Vec<&mut Vec<f64>>> = Vec::with_capacity(k);
        for b in blocks.iter_mut() {
            let mut r = Vec::new();
            b.visit_mut(&mut r);
            block_refs.push(r);
        }
        let mut mixer_refs: Vec<Vec<&mut Vec<f64>>> = Vec::with_capacity(k);
        for m in mixers.iter_mut() {
            let mut r = Vec::new();
            m.visit_mut(&mut r);
            mixer_refs.push(r);
        }
        for (b, m) in block_refs.into_iter().zip(mixer_refs) {
            out.extend(b);
            out.extend(m);
        }
    }

    pub fn param_count(&self) -> usize {
        let mut refs = Vec::new();
        self.visit(&mut refs);
        refs.iter().map(|t| t.len()).sum()
    }

    pub fn snapshot_params(&self) -> Vec<Vec<f64>> {
        let mut refs = Vec::new();
        self.visit(&mut refs);
        refs.into_iter().cloned().collect()
    }

    pub fn restore_params(&mut self, snapshot: &[Vec<f64>]) {
        let mut refs = Vec::new();
        self.visit_mut(&mut refs);
        assert_eq!(refs.len(), snapshot.len());
        for (t, s) in refs.iter_mut().zip(snapshot) {
            t.copy_from_slice(s);
        }
    }

    pub fn enforce_mixer_diag_floor(&mut self) -> usize {
        self.mixers.iter_mut().map(|m| m.enforce_diag_floor()).sum()
    }

    /// Add `delta` to the parameter at flat index `idx` (visitor order).
    pub fn perturb_param(&mut self, idx: usize, delta: f64) {
        let mut refs = Vec::new();
        self.visit_mut(&mut refs);
        let mut seen = 0;
        for t in refs {
            if idx < seen + t.len() {
                t[idx - seen] += delta;
                return;
            }
            seen += t.len();
        }
        panic!("parameter index {idx} out of range");
    }
}

impl InnGrads {
    pub fn zero(&mut self) {
        let mut refs = Vec::new();
        self.visit_mut(&mut refs);
        for t in refs {
            t.fill(0.0);
        }
    }

    pub fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Vec<f64>>) {
        let (blocks, mixers) = (&mut self.blocks, &mut self.mixers);
        let mut block_refs: Vec<Vec<&mut Vec<f64>>> = Vec::new();
        for b in blocks.iter_mut() {
            let mut r = Vec::new();
            b.visit_mut(&mut r);
            block_refs.push(r);
        }
        let mut mixer_refs: Vec<Vec<&mut Vec<f64>>> = Vec::new();
        for m in mixers.iter_mut() {
            let mut r = Vec::new();
            m.visit_mut(&mut r);
            mixer_refs.push(r);
        }
        for (b, m) in block_refs.into_iter().zip(mixer_refs) {
            out.extend(b);
            out.extend(m);
        }
    }

    pub fn flatten(&mut self) -> Vec<f64> {
        let mut refs = Vec::new();
        self.visit_mut(&mut refs);
        let mut out = Vec::new();
        for t in refs {
            out.extend_from_slice(t);
        }
        out
    }
}

/// Batch reconstruction loss: sqrt of the batch-mean squared residual norm.
pub fn loss_lx(x: &[f64], xhat: &[f64], rows: usize) -> f64 {
    debug_assert_eq!(x.len(), xhat.len());
    debug_assert!(rows >= 1);
    let sq: f64 = x
        .iter()
        .zip(xhat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (sq / rows as f64).sqrt()
}

/// Loss plus its gradient with respect to the predictions. The gradient at
/// an exact zero loss is zero (the batch already sits at the optimum).
pub fn loss_lx_grad(x: &[f64], xhat: &[f64], rows: usize) -> (f64, Vec<f64>) {
    let loss = loss_lx(x, xhat, rows);
    if loss == 0.0 || !loss.is_finite() {
        return (loss, vec![0.0; x.len()]);
    }
    let scale = 1.0 / (rows as f64 * loss);
    let grad = xhat
        .iter()
        .zip(x)
        .map(|(&p, &t)| (p - t) * scale)
        .collect();
    (loss, grad)
}

/// Draw a standard-Gaussian latent block (rows x d) from one RNG stream.
pub fn sample_latents(rng: &mut ChaCha8Rng, rows: usize, d: usize) -> Vec<f64> {
    (0..rows * d)
        .map(|_| StandardNormal.sample(rng))
        .collect()
}

/// Mean reconstruction over `n_z` latent draws for standardized y rows;
/// returns standardized x rows.
pub fn reconstruct_rows(
    model: &InnModel,
    y_rows: &[f64],
    n_z: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if y_rows.len() % model.m != 0 {
        return Err(Error::ShapeMismatch {
            context: "reconstruct input".into(),
            expected: format!("rows of length {}", model.m),
            found: format!("total length {}", y_rows.len()),
        });
    }
    let rows = y_rows.len() / model.m;
    let d = model.d();
    let mut acc = vec![0.0; rows * model.n];
    for zs in 0..n_z {
        let mut yz = Vec::with_capacity(rows * model.n);
        for r in 0..rows {
            let mut rng = seeds::rng2(seed, seeds::STREAM_RECON_Z, r as u64, zs as u64);
            yz.extend_from_slice(&y_rows[r * model.m..(r + 1) * model.m]);
            yz.extend(sample_latents(&mut rng, 1, d));
        }
        let xhat = model.toward_x_nocache(&yz, rows)?;
        for (a, v) in acc.iter_mut().zip(&xhat) {
            *a += v;
        }
    }
    let inv = 1.0 / n_z as f64;
    for a in acc.iter_mut() {
        *a *= inv;
    }
    Ok(acc)
}

/// Compare analytic parameter gradients of the loss against central finite
/// differences (step 1e-5) over every parameter; returns the largest
/// relative error. Meant for small models (N <= 16).
pub fn gradient_check(model: &InnModel, y: &[f64], z: &[f64], x: &[f64]) -> Result<f64> {
    let rows = x.len() / model.n;
    let d = model.d();
    let mut yz = Vec::with_capacity(rows * model.n);
    for r in 0..rows {
        yz.extend_from_slice(&y[r * model.m..(r + 1) * model.m]);
        yz.extend_from_slice(&z[r * d..(r + 1) * d]);
    }

    let (xhat, caches) = model.toward_x_batch(&yz, rows)?;
    let (_, dxhat) = loss_lx_grad(x, &xhat, rows);
    let mut grads = model.zeros_like();
    model.backward_from_x(&caches, &dxhat, &mut grads);
    let analytic = grads.flatten();

    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut probe = model.clone();
    for idx in 0..analytic.len() {
        probe.perturb_param(idx, h);
        let up = loss_lx(x, &probe.toward_x_nocache(&yz, rows)?, rows);
        probe.perturb_param(idx, -2.0 * h);
        let down = loss_lx(x, &probe.toward_x_nocache(&yz, rows)?, rows);
        probe.perturb_param(idx, h);
        let fd = (up - down) / (2.0 * h);
        let g = analytic[idx];
        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-5);
        worst = worst.max(rel);
    }
    Ok(worst)
}

pub fn write_checkpoint(model: &InnModel, meta_json: &str, path: &Path) -> Result<()> {
    let mut w = Writer::new(b"BINN", 1);
    w.u64(model.n as u64);
    w.u64(model.m as u64);
    w.u64(model.k as u64);
    w.u64(model.hidden as u64);
    w.f64(model.s_clamp);
    for mx in &model.mixers {
        w.u32_slice(&mx.perm);
    }
    w.u64(model.param_count() as u64);
    let mut refs = Vec::new();
    model.visit(&mut refs);
    for t in refs {
        w.f64_slice(t);
    }
    w.json(meta_json);
    w.write_to(path)
}

pub fn read_checkpoint(path: &Path) -> Result<(InnModel, String)> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(&bytes, &path.display().to_string());
    r.expect_magic(b"BINN", 1)?;
    let n = r.u64()? as usize;
    let m = r.u64()? as usize;
    let k = r.u64()? as usize;
    let hidden = r.u64()? as usize;
    let s_clamp = r.f64()?;
    let mut model = InnModel::identity(n, m, k, hidden, s_clamp)?;
    for mx in &mut model.mixers {
        mx.perm = r.u32_vec(n)?;
    }
    let count = r.u64()? as usize;
    if count != model.param_count() {
        return Err(Error::Format(format!(
            "{}: parameter count {count} does not match dims (expected {})",
            path.display(),
            model.param_count()
        )));
    }
    {
        let mut refs = Vec::new();
        model.visit_mut(&mut refs);
        for t in refs.iter_mut() {
            let vals = r.f64_vec(t.len())?;
            t.copy_from_slice(&vals);
        }
    }
    for mx in &model.mixers {
        mx.validate()?;
    }
    let meta = r.json()?;
    Ok((model, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn dims_are_enforced_at_build() {
        assert!(InnModel::identity(10, 10, 2, 8, 2.0).is_err());
        assert!(InnModel::identity(10, 12, 2, 8, 2.0).is_err());
        let model = InnModel::identity(10, 4, 2, 8, 2.0).unwrap();
        assert_eq!(model.d(), 6);
    }

    #[test]
    fn identity_model_concatenates_y_and_z() {
        let model = InnModel::identity(8, 3, 3, 6, 2.0).unwrap();
        let y = vec![0.1, -0.2, 0.3];
        let z = vec![1.0, 2.0, -3.0, 0.5, 0.0];
        let x = model.inverse_map(&y, &z).unwrap();
        assert_eq!(x, vec![0.1, -0.2, 0.3, 1.0, 2.0, -3.0, 0.5, 0.0]);
    }

    #[test]
    fn bijectivity_round_trip() {
        let mut model = InnModel::new(12, 5, 3, 10, 2.0, 42).unwrap();
        model.randomize(7, 0.5);
        let mut rng = seeds::rng(1, 2, 3);
        for _ in 0..50 {
            let y: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let z: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x = model.inverse_map(&y, &z).unwrap();
            let (y2, z2) = model.forward_map(&x).unwrap();
            for (a, b) in y.iter().zip(&y2) {
                assert!((a - b).abs() < 1e-10);
            }
            for (a, b) in z.iter().zip(&z2) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn distinct_latents_give_distinct_reconstructions() {
        let mut model = InnModel::new(10, 4, 2, 8, 2.0, 3).unwrap();
        model.randomize(11, 0.6);
        let y = vec![0.5, -0.5, 0.2, 0.1];
        let mut rng = seeds::rng(9, 9, 9);
        let z1: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z2: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x1 = model.inverse_map(&y, &z1).unwrap();
        let x2 = model.inverse_map(&y, &z2).unwrap();
        let dist: f64 = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(dist > 0.0, "posterior collapsed");
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss_lx(&[1.0, 0.0], &[1.0, 0.0], 1), 0.0);
        assert_eq!(loss_lx(&[1.0, 0.0], &[0.0, 0.0], 1), 1.0);
        // Two rows with squared residual norms 4 and 0 give sqrt(2).
        let x = vec![2.0, 0.0, 1.0, 1.0];
        let xhat = vec![0.0, 0.0, 1.0, 1.0];
        assert!((loss_lx(&x, &xhat, 2) - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_loss_has_zero_gradient() {
        let x = vec![0.3, -0.4];
        let (l, g) = loss_lx_grad(&x, &x, 1);
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_check_identity_on_zero_residual() {
        // At an exact zero residual the loss sits on the sqrt kink, so the
        // meaningful statement is that both gradient routes are near zero
        // in absolute terms: the analytic one exactly, the finite
        // difference up to O(h) kink artifacts.
        let model = InnModel::identity(6, 2, 2, 4, 2.0).unwrap();
        let y = vec![0.1, 0.2];
        let z = vec![0.3, 0.4, 0.5, 0.6];
        let x = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let yz = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];

        let (xhat, caches) = model.toward_x_batch(&yz, 1).unwrap();
        let (loss, dxhat) = loss_lx_grad(&x, &xhat, 1);
        assert_eq!(loss, 0.0);
        let mut grads = model.zeros_like();
        model.backward_from_x(&caches, &dxhat, &mut grads);
        assert!(grads.flatten().iter().all(|&g| g == 0.0));

        let h = 1e-5;
        let mut probe = model.clone();
        for idx in 0..model.param_count() {
            probe.perturb_param(idx, h);
            let up = loss_lx(&x, &probe.toward_x_nocache(&yz, 1).unwrap(), 1);
            probe.perturb_param(idx, -2.0 * h);
            let down = loss_lx(&x, &probe.toward_x_nocache(&yz, 1).unwrap(), 1);
            probe.perturb_param(idx, h);
            let fd = (up - down) / (2.0 * h);
            assert!(fd.abs() < 1e-4, "fd {fd} at param {idx}");
        }
        let _ = (&y, &z);
    }

    #[test]
    fn gradient_check_random_small_model() {
        let mut model = InnModel::new(8, 3, 2, 6, 2.0, 5).unwrap();
        model.randomize(13, 0.5);
        let mut rng = seeds::rng(2, 4, 6);
        let rows = 3;
        let y: Vec<f64> = (0..rows * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..rows * 5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..rows * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let err = gradient_check(&model, &y, &z, &x).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn gradient_check_in_saturation() {
        let mut model = InnModel::new(6, 2, 1, 4, 2.0, 8).unwrap();
        model.randomize(21, 0.5);
        // Push the scale nets deep into the tanh boundary.
        for b in &mut model.blocks {
            for v in b.s1.b3.iter_mut() {
                *v += 3.0;
            }
            for v in b.s2.b3.iter_mut() {
                *v += 3.0;
            }
        }
        let mut rng = seeds::rng(3, 1, 4);
        let y: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let err = gradient_check(&model, &y, &z, &x).unwrap();
        assert!(err < 1e-3, "relative error {err} at saturation");
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut model = InnModel::new(9, 4, 2, 5, 1.5, 77).unwrap();
        model.randomize(3, 0.4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.binn");
        write_checkpoint(&model, "{\"note\":\"test\"}", &path).unwrap();
        let (back, meta) = read_checkpoint(&path).unwrap();
        assert_eq!(model, back);
        assert_eq!(meta, "{\"note\":\"test\"}");
    }

    #[test]
    fn reconstruction_averages_latent_draws() {
        let mut model = InnModel::new(8, 3, 2, 6, 2.0, 10).unwrap();
        model.randomize(4, 0.4);
        let y = vec![0.2, -0.1, 0.4, 0.0, 0.3, -0.2];
        let single = reconstruct_rows(&model, &y, 1, 55).unwrap();
        let averaged = reconstruct_rows(&model, &y, 16, 55).unwrap();
        assert_eq!(single.len(), 16);
        assert_eq!(averaged.len(), 16);
        // Same seed, same first draw: n_z = 1 must be reproducible.
        let again = reconstruct_rows(&model, &y, 1, 55).unwrap();
        assert_eq!(single, again);
    }
}
