//! Core library for simulating magnetic-field measurements of quasi-2D
//! conductors with non-conducting inclusions and reconstructing the binary
//! conductivity map from those measurements.
//!
//! The pipeline, end to end:
//!
//! 1. [`scene`] samples random disk geometries and rasterizes them into
//!    relative-conductivity grids.
//! 2. [`physics`] solves the steady-state conduction problem on the grid and
//!    integrates Biot-Savart to produce one-component readings on a sensor
//!    array below the channel.
//! 3. [`dataset`] batches scenes into paired (map, reading) datasets with a
//!    train/validation split, standardization, and a binary file format.
//! 4. [`linear`] fits multi-output ridge and elastic-net regressions as
//!    classical reconstruction baselines.
//! 5. [`inn`] is an invertible network between map-space and
//!    [reading, latent]-space, trained in the map direction.
//! 6. [`dither`] scores continuous reconstructions by randomized error
//!    diffusion: ensembles of binary maps, a per-pixel density, and the
//!    groundtruth log-likelihood under it.
//!
//! Everything is deterministic given the seeds in [`config::RunConfig`].
//! Data-parallel loops use rayon when the `parallel` feature (default) is
//! enabled and fall back to sequential iteration otherwise; see [`par`].

pub mod config;
pub mod dataset;
pub mod dither;
pub mod error;
pub mod inn;
pub mod io;
pub mod linalg;
pub mod linear;
pub mod par;
pub mod physics;
pub mod scene;
pub mod seeds;

pub use error::{Error, Result};
