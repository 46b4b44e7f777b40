//! Side-by-side benchmarks of the rayon-parallel data paths against their
//! sequential fallbacks: dataset generation (scene sampling + conduction
//! solve + Biot-Savart per scene) and dither-ensemble construction.
//!
//! Run with `cargo bench -p btomo-core`. Building with
//! `--no-default-features` removes rayon entirely, in which case only the
//! sequential groups are meaningful.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use btomo_core::config::RunConfig;
use btomo_core::dataset::generate;
use btomo_core::dither::{build_ensemble, DitherConfig, FractionSource, Granularity};
use btomo_core::par;

fn bench_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.scene.grid_nx = 20;
    cfg.scene.grid_ny = 12;
    cfg.physics.sensor_rows = 6;
    cfg.physics.sensor_cols = 6;
    cfg.validate().unwrap();
    cfg
}

fn dataset_generation(c: &mut Criterion) {
    let cfg = bench_config();
    let mut group = c.benchmark_group("generate_32_scenes");
    group.sample_size(10);
    if par::parallel_enabled() {
        group.bench_function("rayon", |b| {
            b.iter(|| {
                par::set_force_sequential(false);
                black_box(generate(&cfg, 32, 7).unwrap())
            })
        });
    }
    group.bench_function("sequential", |b| {
        b.iter(|| {
            par::set_force_sequential(true);
            let out = black_box(generate(&cfg, 32, 7).unwrap());
            par::set_force_sequential(false);
            out
        })
    });
    group.finish();
}

fn dither_ensembles(c: &mut Criterion) {
    let mut map = vec![0.0; 510];
    for (i, v) in map.iter_mut().enumerate() {
        *v = (i as f64 * 0.37).sin().abs();
    }
    let dcfg = DitherConfig {
        ensemble_size: 100,
        source: FractionSource::Dirichlet([1.0; 4]),
        granularity: Granularity::PerPixel,
        seed: 5,
        epsilon: None,
    };
    let mut group = c.benchmark_group("dither_ensemble_100");
    if par::parallel_enabled() {
        group.bench_function("rayon", |b| {
            b.iter(|| {
                par::set_force_sequential(false);
                black_box(build_ensemble(&map, 30, 17, &dcfg).unwrap())
            })
        });
    }
    group.bench_function("sequential", |b| {
        b.iter(|| {
            par::set_force_sequential(true);
            let out = black_box(build_ensemble(&map, 30, 17, &dcfg).unwrap());
            par::set_force_sequential(false);
            out
        })
    });
    group.finish();
}

criterion_group!(benches, dataset_generation, dither_ensembles);
criterion_main!(benches);
