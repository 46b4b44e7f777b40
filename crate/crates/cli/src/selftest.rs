//! Built-in oracle suites: the finite-wire field against the analytic
//! formula, analytic gradients against central finite differences, and the
//! degenerate-fraction dither against an independently coded textbook
//! Floyd-Steinberg pass.

use rand::Rng;
use rand_distr::{Dirichlet, Distribution};

use btomo_core::dither::{dither_once, FractionSource, Granularity, CLASSIC_FRACTIONS};
use btomo_core::inn::{gradient_check, InnModel};
use btomo_core::physics::{biot_savart, CurrentField, FieldComponent, SensorArray, MU0_OVER_4PI};
use btomo_core::scene::ChannelSpec;
use btomo_core::seeds;
use btomo_core::{Error, Result};

fn check(name: &str, pass: bool, detail: String) -> bool {
    if pass {
        println!("[PASS] {name}: {detail}");
    } else {
        println!("[FAIL] {name}: {detail}");
    }
    pass
}

/// Straight wire along x discretized as one row of cells; the midpoint
/// field below the wire must match mu0 I / (4 pi d) (sin t2 - sin t1).
fn wire_field_suite() -> bool {
    let spec = ChannelSpec {
        length_x: 0.2,
        length_y: 0.003,
        thickness: 0.001,
        grid_nx: 200,
        grid_ny: 3,
        sigma_ref: 1.0e6,
        ..ChannelSpec::default()
    };
    let current = 2.0;
    let ny = spec.grid_ny;
    let dx = spec.dx();
    let y_wire = 1.5 * spec.dy();
    let mut field = CurrentField {
        nx: spec.grid_nx,
        ny,
        dx,
        dy: spec.dy(),
        thickness: spec.thickness,
        phi: vec![0.0; spec.n_cells()],
        jx: vec![0.0; spec.n_cells()],
        jy: vec![0.0; spec.n_cells()],
        flux_x: vec![0.0; (spec.grid_nx + 1) * ny],
        flux_y: vec![0.0; spec.grid_nx * (ny + 1)],
        total_current: current,
    };
    let j_wire = current / (spec.dy() * spec.thickness);
    for ix in 0..spec.grid_nx {
        field.jx[ix * ny + 1] = j_wire;
    }
    let mut worst: f64 = 0.0;
    for d_cells in [3.0, 5.0, 10.0] {
        let d = d_cells * dx;
        let array = SensorArray {
            rows: 1,
            cols: 1,
            d_sensor: d,
            component: FieldComponent::Y,
            positions: vec![[spec.length_x / 2.0, y_wire, -d]],
            indices: None,
        };
        let got = match biot_savart(&field, &spec, &array) {
            Ok(r) => r.values[0],
            Err(e) => {
                return check("wire field", false, format!("evaluation failed: {e}"));
            }
        };
        let half = spec.length_x / 2.0;
        let sin_theta = half / (half * half + d * d).sqrt();
        let analytic = MU0_OVER_4PI * current / d * 2.0 * sin_theta;
        worst = worst.max((got - analytic).abs() / analytic.abs());
    }
    check(
        "wire field",
        worst < 0.01,
        format!("max relative error {worst:.2e} at >= 3 cell widths (tolerance 1e-2)"),
    )
}

fn gradient_suite() -> bool {
    let mut model = match InnModel::new(10, 4, 2, 8, 2.0, 41) {
        Ok(m) => m,
        Err(e) => return check("gradient check", false, format!("{e}")),
    };
    model.randomize(17, 0.5);
    let mut rng = seeds::rng(23, 5, 0);
    let rows = 3;
    let y: Vec<f64> = (0..rows * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let z: Vec<f64> = (0..rows * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x: Vec<f64> = (0..rows * 10).map(|_| rng.random_range(-1.0..1.0)).collect();
    match gradient_check(&model, &y, &z, &x) {
        Ok(err) => check(
            "gradient check",
            err < 1e-4,
            format!("max relative error {err:.2e} (tolerance 1e-4)"),
        ),
        Err(e) => check("gradient check", false, format!("{e}")),
    }
}

/// Textbook Floyd-Steinberg, written here independently of the library
/// implementation.
fn textbook_floyd_steinberg(map: &[f64], nx: usize, ny: usize) -> Vec<u8> {
    let mut buf = map.to_vec();
    let mut out = vec![0u8; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let idx = ix * ny + iy;
            let old = buf[idx];
            let new = if old >= 0.5 { 1.0 } else { 0.0 };
            out[idx] = new as u8;
            let err = old - new;
            if ix + 1 < nx {
                buf[(ix + 1) * ny + iy] += err * 7.0 / 16.0;
            }
            if iy + 1 < ny {
                if ix > 0 {
                    buf[(ix - 1) * ny + iy + 1] += err * 3.0 / 16.0;
                }
                buf[ix * ny + iy + 1] += err * 5.0 / 16.0;
                if ix + 1 < nx {
                    buf[(ix + 1) * ny + iy + 1] += err * 1.0 / 16.0;
                }
            }
        }
    }
    out
}

fn dither_suite() -> bool {
    let src = FractionSource::Constant(CLASSIC_FRACTIONS);
    for seed in 0..20u64 {
        let mut rng = seeds::rng(seed, 77, 0);
        let map: Vec<f64> = (0..32 * 32).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut drng = seeds::rng(seed, 78, 0);
        let got = match dither_once(&map, 32, 32, &src, Granularity::PerPixel, &mut drng) {
            Ok(g) => g,
            Err(e) => return check("dither degenerate limit", false, format!("{e}")),
        };
        let want = textbook_floyd_steinberg(&map, 32, 32);
        if got != want {
            return check(
                "dither degenerate limit",
                false,
                format!("pixel mismatch on random input {seed}"),
            );
        }
    }
    let dist = match Dirichlet::new([1.0, 1.0, 1.0, 1.0]) {
        Ok(d) => d,
        Err(e) => return check("dither degenerate limit", false, format!("{e}")),
    };
    let mut rng = seeds::rng(99, 99, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..5000 {
        let f: [f64; 4] = dist.sample(&mut rng);
        if f.iter().any(|&v| v < 0.0) {
            return check("dither degenerate limit", false, "negative fraction".into());
        }
        worst = worst.max((f.iter().sum::<f64>() - 1.0).abs());
    }
    check(
        "dither degenerate limit",
        worst < 1e-12,
        format!(
            "matches textbook output on 20 random 32x32 inputs; fraction sums within {worst:.1e}"
        ),
    )
}

pub fn run() -> Result<()> {
    let ok = [wire_field_suite(), gradient_suite(), dither_suite()]
        .iter()
        .all(|&p| p);
    if ok {
        println!("selftest passed");
        Ok(())
    } else {
        Err(Error::Numerical("selftest failed".into()))
    }
}
