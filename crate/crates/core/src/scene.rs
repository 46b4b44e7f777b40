//! Random scene geometry: non-conducting disks in a conducting channel.
//!
//! A scene is a set of disks standing in the rectangular channel. Disks may
//! overlap (a cluster of fully covered cells is as meaningful as one large
//! void). Rasterization assigns every grid cell its conducting area
//! fraction, estimated by `s x s` subsampling, and binarization thresholds
//! that fraction.
//!
//! Grid layout: cell `(ix, iy)` lives at `values[ix * grid_ny + iy]`, with
//! `ix` along the current direction (channel length) and `iy` across it.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Channel geometry and grid resolution. Defaults mirror the reference
/// cell: a 16 x 7 x 0.5 cm channel of liquid GaInSn on a 30 x 17 grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub length_x: f64,
    pub length_y: f64,
    pub thickness: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub sigma_ref: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            length_x: 0.16,
            length_y: 0.07,
            thickness: 0.005,
            grid_nx: 30,
            grid_ny: 17,
            sigma_ref: 3.3e6,
        }
    }
}

impl ChannelSpec {
    pub fn n_cells(&self) -> usize {
        self.grid_nx * self.grid_ny
    }

    pub fn dx(&self) -> f64 {
        self.length_x / self.grid_nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.length_y / self.grid_ny as f64
    }

    /// Cell center in channel coordinates (origin at the channel corner).
    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        ((ix as f64 + 0.5) * self.dx(), (iy as f64 + 0.5) * self.dy())
    }

    pub fn validate(&self) -> Result<()> {
        if self.length_x <= 0.0 || self.length_y <= 0.0 || self.thickness <= 0.0 {
            return Err(Error::Config(
                "channel dimensions must be positive".into(),
            ));
        }
        if self.grid_nx < 2 || self.grid_ny < 2 {
            return Err(Error::Config("grid must be at least 2 x 2".into()));
        }
        if self.sigma_ref <= 0.0 {
            return Err(Error::Config("sigma_ref must be positive".into()));
        }
        Ok(())
    }
}

/// Ranges for the random disk ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskConfig {
    pub min_disks: usize,
    pub max_disks: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Attempt cap for placing a single disk before the configuration is
    /// declared infeasible.
    pub max_attempts: usize,
}

impl Default for DiskConfig {
    fn default() -> Self {
        // 30..120 disks with diameters 4..5 mm
        Self {
            min_disks: 30,
            max_disks: 120,
            r_min: 2.0e-3,
            r_max: 2.5e-3,
            max_attempts: 64,
        }
    }
}

impl DiskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_disks > self.max_disks {
            return Err(Error::Config("min_disks exceeds max_disks".into()));
        }
        if self.max_disks > 0 && (self.r_min <= 0.0 || self.r_max < self.r_min) {
            return Err(Error::Config(
                "disk radius range must satisfy 0 < r_min <= r_max".into(),
            ));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sampled disk geometry for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskSet {
    pub centers: Vec<(f64, f64)>,
    pub radii: Vec<f64>,
}

impl DiskSet {
    pub fn count(&self) -> usize {
        self.radii.len()
    }

    pub fn empty() -> Self {
        Self {
            centers: Vec::new(),
            radii: Vec::new(),
        }
    }
}

/// Relative-conductivity grid; `binary` marks a thresholded map.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityMap {
    pub values: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
    pub binary: bool,
}

impl ConductivityMap {
    pub fn uniform(spec: &ChannelSpec) -> Self {
        Self {
            values: vec![1.0; spec.n_cells()],
            nx: spec.grid_nx,
            ny: spec.grid_ny,
            binary: true,
        }
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.ny + iy]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, v: f64) {
        self.values[ix * self.ny + iy] = v;
    }
}

/// Draw a random disk set: count uniform over `min..=max`, radii uniform
/// over `[r_min, r_max]`, centers uniform over the region where the full
/// disk fits inside the channel. Deterministic given the seed.
pub fn sample_scene(spec: &ChannelSpec, cfg: &DiskConfig, rng_seed: u64) -> Result<DiskSet> {
    spec.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let count = if cfg.max_disks == cfg.min_disks {
        cfg.min_disks
    } else {
        rng.random_range(cfg.min_disks..=cfg.max_disks)
    };
    let mut disks = DiskSet {
        centers: Vec::with_capacity(count),
        radii: Vec::with_capacity(count),
    };
    for _ in 0..count {
        let mut placed = false;
        for _ in 0..cfg.max_attempts {
            let r = if cfg.r_max > cfg.r_min {
                rng.random_range(cfg.r_min..=cfg.r_max)
            } else {
                cfg.r_min
            };
            // The admissible center region keeps the whole disk inside.
            if 2.0 * r >= spec.length_x || 2.0 * r >= spec.length_y {
                continue;
            }
            let cx = rng.random_range(r..=(spec.length_x - r));
            let cy = rng.random_range(r..=(spec.length_y - r));
            disks.centers.push((cx, cy));
            disks.radii.push(r);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::Config(format!(
                "no disk of radius in [{:.4}, {:.4}] fits inside the {} x {} channel after {} attempts",
                cfg.r_min, cfg.r_max, spec.length_x, spec.length_y, cfg.max_attempts
            )));
        }
    }
    Ok(disks)
}

/// Rasterize disks onto the grid: each cell's value is its conducting area
/// fraction (1 minus the fraction covered by disks), estimated with an
/// `s x s` subsample lattice per cell. Overlaps count once.
pub fn rasterize(spec: &ChannelSpec, disks: &DiskSet, subsample: usize) -> ConductivityMap {
    let s = subsample.max(1);
    let (nx, ny) = (spec.grid_nx, spec.grid_ny);
    let dx = spec.dx();
    let dy = spec.dy();
    let samples_per_cell = s * s;
    let words_per_cell = samples_per_cell.div_ceil(64);
    // Coverage bitmask per cell; OR-ing disks makes the result independent
    // of disk order and exact under overlap.
    let mut covered = vec![0u64; nx * ny * words_per_cell];

    for (&(cx, cy), &r) in disks.centers.iter().zip(&disks.radii) {
        let r2 = r * r;
        let ix_lo = (((cx - r) / dx).floor().max(0.0)) as usize;
        let ix_hi = ((((cx + r) / dx).ceil()) as usize).min(nx);
        let iy_lo = (((cy - r) / dy).floor().max(0.0)) as usize;
        let iy_hi = ((((cy + r) / dy).ceil()) as usize).min(ny);
        for ix in ix_lo..ix_hi {
            for iy in iy_lo..iy_hi {
                let cell = ix * ny + iy;
                let base = cell * words_per_cell;
                for a in 0..s {
                    let px = (ix as f64 + (a as f64 + 0.5) / s as f64) * dx;
                    let ddx = px - cx;
                    for b in 0..s {
                        let py = (iy as f64 + (b as f64 + 0.5) / s as f64) * dy;
                        let ddy = py - cy;
                        if ddx * ddx + ddy * ddy <= r2 {
                            let bit = a * s + b;
                            covered[base + bit / 64] |= 1u64 << (bit % 64);
                        }
                    }
                }
            }
        }
    }

    let values = (0..nx * ny)
        .map(|cell| {
            let base = cell * words_per_cell;
            let hits: u32 = covered[base..base + words_per_cell]
                .iter()
                .map(|w| w.count_ones())
                .sum();
            1.0 - hits as f64 / samples_per_cell as f64
        })
        .collect();

    ConductivityMap {
        values,
        nx,
        ny,
        binary: false,
    }
}

/// Threshold a continuous map: values below `threshold` become 0, values at
/// or above it become 1.
pub fn binarize(map: &ConductivityMap, threshold: f64) -> ConductivityMap {
    ConductivityMap {
        values: map
            .values
            .iter()
            .map(|&v| if v < threshold { 0.0 } else { 1.0 })
            .collect(),
        nx: map.nx,
        ny: map.ny,
        binary: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_ranges_hold() {
        let spec = ChannelSpec::default();
        let cfg = DiskConfig::default();
        let disks = sample_scene(&spec, &cfg, 7).unwrap();
        assert!(disks.count() >= 30 && disks.count() <= 120);
        for &r in &disks.radii {
            assert!((2.0e-3..=2.5e-3).contains(&r), "radius {r}");
        }
        for (&(cx, cy), &r) in disks.centers.iter().zip(&disks.radii) {
            assert!(cx - r >= 0.0 && cx + r <= spec.length_x);
            assert!(cy - r >= 0.0 && cy + r <= spec.length_y);
        }
    }

    #[test]
    fn zero_disk_range_gives_empty_set() {
        let spec = ChannelSpec::default();
        let cfg = DiskConfig {
            min_disks: 0,
            max_disks: 0,
            ..DiskConfig::default()
        };
        let disks = sample_scene(&spec, &cfg, 1).unwrap();
        assert_eq!(disks, DiskSet::empty());
    }

    #[test]
    fn same_seed_same_scene() {
        let spec = ChannelSpec::default();
        let cfg = DiskConfig::default();
        let a = sample_scene(&spec, &cfg, 123).unwrap();
        let b = sample_scene(&spec, &cfg, 123).unwrap();
        assert_eq!(a, b);
        let c = sample_scene(&spec, &cfg, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn oversized_disk_reports_infeasible() {
        let spec = ChannelSpec::default();
        let cfg = DiskConfig {
            min_disks: 1,
            max_disks: 1,
            r_min: 0.05, // diameter 0.1 m > 0.07 m channel width
            r_max: 0.05,
            max_attempts: 8,
        };
        assert!(matches!(
            sample_scene(&spec, &cfg, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn empty_set_rasterizes_to_ones() {
        let spec = ChannelSpec::default();
        let map = rasterize(&spec, &DiskSet::empty(), 8);
        assert!(map.values.iter().all(|&v| v == 1.0));
        assert!(!map.binary);
    }

    #[test]
    fn covering_disk_zeroes_the_cell() {
        let spec = ChannelSpec::default();
        let dx = spec.dx();
        let dy = spec.dy();
        // Disk much larger than one cell, centered on cell (3, 4).
        let (cx, cy) = spec.cell_center(3, 4);
        let disks = DiskSet {
            centers: vec![(cx, cy)],
            radii: vec![2.0 * (dx * dx + dy * dy).sqrt()],
        };
        let map = rasterize(&spec, &disks, 8);
        assert_eq!(map.at(3, 4), 0.0);
    }

    #[test]
    fn area_fraction_matches_closed_form() {
        // One cell spanning the whole channel; disk centered inside.
        let spec = ChannelSpec {
            length_x: 1.0,
            length_y: 1.0,
            grid_nx: 2,
            grid_ny: 2,
            ..ChannelSpec::default()
        };
        let r = 0.2;
        let disks = DiskSet {
            centers: vec![(0.5, 0.5)],
            radii: vec![r],
        };
        // Use a fine lattice; the disk straddles the four cells equally so
        // the total covered fraction is pi r^2 over the unit square.
        let s = 64;
        let map = rasterize(&spec, &disks, s);
        let covered: f64 = map.values.iter().map(|v| 1.0 - v).sum::<f64>() / 4.0 * 1.0;
        let expect = std::f64::consts::PI * r * r;
        assert!(
            (covered - expect).abs() < 0.01,
            "covered {covered} vs analytic {expect}"
        );
    }

    #[test]
    fn adding_a_disk_never_raises_conductivity() {
        let spec = ChannelSpec::default();
        let cfg = DiskConfig::default();
        let disks = sample_scene(&spec, &cfg, 5).unwrap();
        let base = rasterize(&spec, &disks, 8);
        let mut more = disks.clone();
        more.centers.push((0.08, 0.035));
        more.radii.push(2.2e-3);
        let grown = rasterize(&spec, &more, 8);
        for (a, b) in grown.values.iter().zip(&base.values) {
            assert!(a <= b);
        }
    }

    #[test]
    fn subsampling_converges() {
        let spec = ChannelSpec::default();
        let disks = sample_scene(&spec, &DiskConfig::default(), 9).unwrap();
        for s in [4usize, 8, 16] {
            let coarse = rasterize(&spec, &disks, s);
            let fine = rasterize(&spec, &disks, 2 * s);
            let max_delta = coarse
                .values
                .iter()
                .zip(&fine.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(
                max_delta < 2.0 / s as f64,
                "s={s}: max delta {max_delta}"
            );
        }
    }

    #[test]
    fn binarize_boundary_behavior() {
        let map = ConductivityMap {
            values: vec![0.20, 0.25, 0.9, 0.0],
            nx: 2,
            ny: 2,
            binary: false,
        };
        let b = binarize(&map, 0.25);
        assert_eq!(b.values, vec![0.0, 1.0, 1.0, 0.0]);
        assert!(b.binary);
    }

    #[test]
    fn binarize_keeps_all_ones() {
        let map = ConductivityMap {
            values: vec![1.0; 6],
            nx: 3,
            ny: 2,
            binary: false,
        };
        assert!(binarize(&map, 0.25).values.iter().all(|&v| v == 1.0));
    }

    proptest! {
        #[test]
        fn binarize_is_idempotent(values in proptest::collection::vec(0.0f64..=1.0, 12)) {
            let map = ConductivityMap { values, nx: 3, ny: 4, binary: false };
            let once = binarize(&map, 0.25);
            let twice = binarize(&once, 0.25);
            prop_assert_eq!(once.values, twice.values);
        }
    }
}
