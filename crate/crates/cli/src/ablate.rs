//! Ablation sweep over sensor distance, sensor count and coupling-block
//! count. Scenes are sampled and solved once; each sensor setup only
//! re-runs the Biot-Savart integration, and each cell trains a fresh
//! network instance. Results land in one tidy CSV; a failed cell is
//! reported and recorded as NaN without stopping the sweep.

use std::fmt::Write as _;
use std::time::Instant;

use btomo_core::config::RunConfig;
use btomo_core::dataset::{assemble, fit_standardizer, solved_scenes, split_standardized, STD_EPSILON};
use btomo_core::dither::{self, DitherConfig};
use btomo_core::inn::{self, InnModel, TrainSet};
use btomo_core::par;
use btomo_core::physics::{biot_savart, checkerboard_indices, SensorArray};
use btomo_core::{Error, Result};

use crate::commands::Ctx;

fn subset_indices(cfg: &RunConfig, n_sensors: usize) -> Result<Vec<usize>> {
    let total = cfg.physics.sensor_rows * cfg.physics.sensor_cols;
    if n_sensors == total {
        return Ok((0..total).collect());
    }
    if let Some(explicit) = &cfg.ablation.sensor_indices {
        if explicit.len() == n_sensors {
            return Ok(explicit.clone());
        }
    }
    let checker = checkerboard_indices(cfg.physics.sensor_rows, cfg.physics.sensor_cols);
    if n_sensors == checker.len() {
        return Ok(checker);
    }
    Err(Error::Config(format!(
        "no sensor layout for {n_sensors} of {total} sensors: provide ablation.sensor_indices"
    )))
}

struct CellResult {
    val_loss: f64,
    mean_loglik: f64,
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    ctx: &Ctx,
    cell_cfg: &RunConfig,
    x_rows: &[Vec<f64>],
    y_rows: &[Vec<f64>],
    n: usize,
    m: usize,
    k: usize,
    seed: u64,
) -> Result<CellResult> {
    let ds = assemble(cell_cfg, x_rows.to_vec(), y_rows.to_vec(), n, m, seed, 0);
    let standardizer = fit_standardizer(&ds, STD_EPSILON)?;
    let split = split_standardized(&ds, &standardizer);
    let mut model = InnModel::new(n, m, k, ctx.cfg.inn.hidden, ctx.cfg.inn.s_clamp, ctx.cfg.inn.seed)?;
    let data = TrainSet {
        x_train: &split.x_train,
        y_train: &split.y_train,
        x_val: &split.x_val,
        y_val: &split.y_val,
        n,
        m,
    };
    let outcome = inn::train(&mut model, &data, &ctx.train_config())?;
    if let inn::StopReason::Diverged { epoch } = outcome.stop {
        return Err(Error::Numerical(format!("training diverged at epoch {epoch}")));
    }

    let mean_loglik = if ctx.cfg.ablation.with_dither_score && !split.val_ids.is_empty() {
        let std_out = inn::reconstruct_rows(&model, &split.y_val, ctx.cfg.inn.n_z, ctx.cfg.inn.seed)?;
        let preds = standardizer.invert_x_matrix(&std_out);
        let mut gts = Vec::with_capacity(split.val_ids.len() * n);
        for &i in &split.val_ids {
            gts.extend_from_slice(ds.x_row(i));
        }
        let dcfg = DitherConfig::from_eval(&ctx.cfg.eval)?;
        let scored = dither::evaluate_rows(
            &preds,
            &gts,
            cell_cfg.scene.grid_nx,
            cell_cfg.scene.grid_ny,
            &split.val_ids,
            &dcfg,
        )?;
        let values: Vec<f64> = scored.iter().map(|&(_, s)| s).collect();
        dither::mean_std(&values).0
    } else {
        f64::NAN
    };

    Ok(CellResult {
        val_loss: outcome.best_val_loss,
        mean_loglik,
    })
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let ab = &ctx.cfg.ablation;
    if ab.d_sensor_mm.is_empty() || ab.n_sensors.is_empty() || ab.k.is_empty() {
        return Err(Error::Config(
            "ablation lists d_sensor_mm, n_sensors and k must be non-empty".into(),
        ));
    }
    let seed = ctx.cfg.dataset.seed;
    let n_scenes = ctx.cfg.dataset.n_scenes;
    let spec = ctx.cfg.channel_spec();
    let component = ctx.cfg.field_component()?;

    println!("solving {n_scenes} scenes once for the whole sweep...");
    let started = Instant::now();
    let (scenes, resamples) = solved_scenes(&ctx.cfg, n_scenes, seed)?;
    println!(
        "scenes ready in {:.1} s ({} resampled)",
        started.elapsed().as_secs_f64(),
        resamples
    );
    let x_rows: Vec<Vec<f64>> = scenes.iter().map(|s| s.x_binary.clone()).collect();
    let n = spec.n_cells();

    let mut csv = String::from("d_sensor_mm,n_sensors,k,val_loss,mean_loglik,seed\n");
    for &d_mm in &ab.d_sensor_mm {
        let full_array = SensorArray::lattice(
            &spec,
            ctx.cfg.physics.sensor_rows,
            ctx.cfg.physics.sensor_cols,
            d_mm * 1e-3,
            component,
        )?;
        let full_readings: Vec<Vec<f64>> = par::try_map_indexed(scenes.len(), |i| {
            biot_savart(&scenes[i].field, &spec, &full_array).map(|r| r.values)
        })?;

        for &n_sensors in &ab.n_sensors {
            let indices = subset_indices(&ctx.cfg, n_sensors)?;
            let y_rows: Vec<Vec<f64>> = full_readings
                .iter()
                .map(|row| indices.iter().map(|&i| row[i]).collect())
                .collect();
            let mut cell_cfg = ctx.cfg.clone();
            cell_cfg.physics.d_sensor_mm = d_mm;

            for &k in &ab.k {
                if k == 0 {
                    return Err(Error::Config("ablation k values must be positive".into()));
                }
                let started = Instant::now();
                match run_cell(ctx, &cell_cfg, &x_rows, &y_rows, n, n_sensors, k, seed) {
                    Ok(cell) => {
                        println!(
                            "cell d = {d_mm} mm, sensors = {n_sensors}, k = {k}: val_loss = {:.6}, mean_loglik = {:.3} ({:.1} s)",
                            cell.val_loss,
                            cell.mean_loglik,
                            started.elapsed().as_secs_f64()
                        );
                        let _ = writeln!(
                            csv,
                            "{},{},{},{},{},{}",
                            d_mm, n_sensors, k, cell.val_loss, cell.mean_loglik, seed
                        );
                    }
                    Err(e) => {
                        eprintln!("cell d = {d_mm} mm, sensors = {n_sensors}, k = {k} failed: {e}");
                        let _ = writeln!(csv, "{},{},{},NaN,NaN,{}", d_mm, n_sensors, k, seed);
                    }
                }
            }
        }
    }
    let path = ctx.resolve(&ab.csv);
    std::fs::write(&path, csv)?;
    println!("ablation table -> {}", path.display());
    Ok(())
}
