//! Randomized error diffusion and the groundtruth log-likelihood score.
//!
//! A continuous reconstruction is converted to an ensemble of binary maps
//! by Floyd-Steinberg error diffusion whose four kernel fractions are drawn
//! from a Dirichlet distribution (per pixel by default, per member as an
//! option). Pixels scan row-major, left to right, thresholding at 0.5; the
//! quantization error goes to the classic neighbors (right, below-left,
//! below, below-right) and shares falling outside the grid are dropped.
//! With the constant fraction vector (7, 3, 5, 1)/16 the procedure is
//! exactly the deterministic textbook algorithm.
//!
//! The ensemble density is an independent per-pixel Bernoulli with add-one
//! style smoothing, q = (ones + a) / (E + 2a); the default pseudo-count
//! a = 1 corresponds to the epsilon floor 1/(E + 2). The score of a binary
//! groundtruth under that density is the sum of pixel log-probabilities.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};

use crate::config::EvalSection;
use crate::error::{Error, Result};
use crate::par;
use crate::seeds;

/// Classic Floyd-Steinberg fractions for [right, below-left, below,
/// below-right].
pub const CLASSIC_FRACTIONS: [f64; 4] = [7.0 / 16.0, 3.0 / 16.0, 5.0 / 16.0, 1.0 / 16.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    PerPixel,
    PerMember,
}

impl Granularity {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "per-pixel" => Ok(Self::PerPixel),
            "per-member" => Ok(Self::PerMember),
            other => Err(Error::Config(format!(
                "unknown fraction granularity '{other}'"
            ))),
        }
    }
}

/// Where the kernel fractions come from.
#[derive(Debug, Clone)]
pub enum FractionSource {
    Dirichlet([f64; 4]),
    Constant([f64; 4]),
}

impl FractionSource {
    fn sampler(&self) -> Result<FractionSampler> {
        match self {
            FractionSource::Dirichlet(alpha) => {
                let dist = Dirichlet::new(*alpha).map_err(|e| {
                    Error::Config(format!("invalid dirichlet concentration {alpha:?}: {e}"))
                })?;
                Ok(FractionSampler::Dirichlet(dist))
            }
            FractionSource::Constant(f) => Ok(FractionSampler::Constant(*f)),
        }
    }
}

enum FractionSampler {
    Dirichlet(Dirichlet<f64, 4>),
    Constant([f64; 4]),
}

impl FractionSampler {
    fn draw(&self, rng: &mut ChaCha8Rng) -> [f64; 4] {
        match self {
            FractionSampler::Dirichlet(d) => d.sample(rng),
            FractionSampler::Constant(f) => *f,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DitherConfig {
    pub ensemble_size: usize,
    pub source: FractionSource,
    pub granularity: Granularity,
    pub seed: u64,
    /// Density floor epsilon in (0, 0.5); `None` means 1/(ensemble_size+2).
    pub epsilon: Option<f64>,
}

impl DitherConfig {
    pub fn from_eval(eval: &EvalSection) -> Result<Self> {
        Ok(Self {
            ensemble_size: eval.ensemble_size,
            source: FractionSource::Dirichlet(eval.dirichlet_alpha),
            granularity: Granularity::parse(&eval.granularity)?,
            seed: eval.seed,
            epsilon: eval.epsilon,
        })
    }

    /// Smoothing pseudo-count: a/(E + 2a) = epsilon.
    fn pseudo_count(&self) -> f64 {
        match self.epsilon {
            None => 1.0,
            Some(eps) => eps * self.ensemble_size as f64 / (1.0 - 2.0 * eps),
        }
    }
}

/// One randomized error-diffusion pass. `map` is in the grid layout of
/// [`crate::scene::ConductivityMap`] (pixel `(ix, iy)` at `ix * ny + iy`);
/// values are clamped to [0, 1] before diffusion.
pub fn dither_once(
    map: &[f64],
    nx: usize,
    ny: usize,
    source: &FractionSource,
    granularity: Granularity,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<u8>> {
    debug_assert_eq!(map.len(), nx * ny);
    let sampler = source.sampler()?;
    let mut buf: Vec<f64> = map.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let mut out = vec![0u8; nx * ny];
    let member_fractions = match granularity {
        Granularity::PerMember => Some(sampler.draw(rng)),
        Granularity::PerPixel => None,
    };
    let at = |ix: usize, iy: usize| ix * ny + iy;
    for iy in 0..ny {
        for ix in 0..nx {
            let v = buf[at(ix, iy)];
            let bit = if v >= 0.5 { 1u8 } else { 0u8 };
            out[at(ix, iy)] = bit;
            let err = v - f64::from(bit);
            if err == 0.0 {
                continue;
            }
            let f = match member_fractions {
                Some(f) => f,
                None => sampler.draw(rng),
            };
            if ix + 1 < nx {
                buf[at(ix + 1, iy)] += err * f[0];
            }
            if iy + 1 < ny {
                if ix > 0 {
                    buf[at(ix - 1, iy + 1)] += err * f[1];
                }
                buf[at(ix, iy + 1)] += err * f[2];
                if ix + 1 < nx {
                    buf[at(ix + 1, iy + 1)] += err * f[3];
                }
            }
        }
    }
    Ok(out)
}

/// Ensemble of binarizations of one continuous map plus its fitted
/// per-pixel Bernoulli density.
#[derive(Debug, Clone)]
pub struct DitherEnsemble {
    pub members: Vec<Vec<u8>>,
    pub pixel_freq: Vec<f64>,
    pub density: Vec<f64>,
}

pub fn build_ensemble(
    map: &[f64],
    nx: usize,
    ny: usize,
    cfg: &DitherConfig,
) -> Result<DitherEnsemble> {
    let e = cfg.ensemble_size;
    let members = par::try_map_indexed(e, |i| {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, seeds::STREAM_DITHER, i as u64));
        dither_once(map, nx, ny, &cfg.source, cfg.granularity, &mut rng)
    })?;
    let mut ones = vec![0u32; nx * ny];
    for member in &members {
        for (c, &b) in ones.iter_mut().zip(member) {
            *c += u32::from(b);
        }
    }
    let a = cfg.pseudo_count();
    let pixel_freq: Vec<f64> = ones.iter().map(|&c| f64::from(c) / e as f64).collect();
    let density = ones
        .iter()
        .map(|&c| (f64::from(c) + a) / (e as f64 + 2.0 * a))
        .collect();
    Ok(DitherEnsemble {
        members,
        pixel_freq,
        density,
    })
}

/// Log-likelihood of a binary groundtruth under a per-pixel Bernoulli
/// density (natural log). Smoothing keeps every q strictly inside (0, 1).
pub fn log_likelihood(groundtruth: &[f64], density: &[f64]) -> f64 {
    debug_assert_eq!(groundtruth.len(), density.len());
    groundtruth
        .iter()
        .zip(density)
        .map(|(&x, &q)| {
            if x >= 0.5 {
                q.ln()
            } else {
                (1.0 - q).ln()
            }
        })
        .sum()
}

/// The score an ensemble of perfect members attains: every pixel at the
/// smoothing bound.
pub fn max_attainable_score(n_pixels: usize, cfg: &DitherConfig) -> f64 {
    let e = cfg.ensemble_size as f64;
    let a = cfg.pseudo_count();
    n_pixels as f64 * ((e + a) / (e + 2.0 * a)).ln()
}

/// Score a batch of continuous predictions against binary groundtruths.
/// `sample_ids` key the per-sample ensemble seeds, so identical predictions
/// under identical ids reproduce identical scores.
pub fn evaluate_rows(
    predictions: &[f64],
    groundtruths: &[f64],
    nx: usize,
    ny: usize,
    sample_ids: &[usize],
    cfg: &DitherConfig,
) -> Result<Vec<(usize, f64)>> {
    let n = nx * ny;
    if predictions.len() != groundtruths.len() || predictions.len() != sample_ids.len() * n {
        return Err(Error::ShapeMismatch {
            context: "dither evaluation".into(),
            expected: format!("{} rows of length {n}", sample_ids.len()),
            found: format!(
                "{} prediction values, {} groundtruth values",
                predictions.len(),
                groundtruths.len()
            ),
        });
    }
    par::try_map_indexed(sample_ids.len(), |r| {
        let id = sample_ids[r];
        let sample_cfg = DitherConfig {
            seed: seeds::derive(cfg.seed, seeds::STREAM_DITHER, id as u64),
            ..cfg.clone()
        };
        let ensemble = build_ensemble(&predictions[r * n..(r + 1) * n], nx, ny, &sample_cfg)?;
        Ok((
            id,
            log_likelihood(&groundtruths[r * n..(r + 1) * n], &ensemble.density),
        ))
    })
}

pub fn mean_std(scores: &[f64]) -> (f64, f64) {
    if scores.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / scores.len() as f64;
    (mean, var.sqrt())
}
