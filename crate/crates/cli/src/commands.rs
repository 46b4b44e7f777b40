//! Implementations of the single-step subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use btomo_core::config::RunConfig;
use btomo_core::dataset::{
    self, fit_standardizer, read_dataset, read_predictions, split_standardized, write_dataset,
    write_predictions, write_standardizer, Dataset, Predictions, Standardizer, STD_EPSILON,
};
use btomo_core::dither::{self, DitherConfig};
use btomo_core::inn::{self, InnModel, StopReason, TrainConfig, TrainSet};
use btomo_core::io::read_file;
use btomo_core::linear::{self, LinearKind, TrainData};
use btomo_core::{Error, Result};

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Ctx {
    /// Config-relative artifact path: absolute paths pass through,
    /// relative ones land under --out.
    pub fn resolve(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.out.join(path)
        }
    }

    pub fn dataset_path(&self, explicit: Option<&Path>) -> PathBuf {
        match explicit {
            Some(p) => p.to_path_buf(),
            None => self.resolve(&self.cfg.dataset.path),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.cfg.inn.batch_size,
            learning_rate: self.cfg.inn.learning_rate,
            beta1: self.cfg.inn.adam_beta1,
            beta2: self.cfg.inn.adam_beta2,
            eps: self.cfg.inn.adam_eps,
            max_epochs: self.cfg.inn.max_epochs,
            patience: self.cfg.inn.patience,
            seed: self.cfg.inn.seed,
        }
    }
}

pub fn generate(ctx: &Ctx, n_override: Option<usize>) -> Result<()> {
    let n = n_override.unwrap_or(ctx.cfg.dataset.n_scenes);
    if n == 0 {
        return Err(Error::Config("n_scenes must be at least 1".into()));
    }
    let seed = ctx.cfg.dataset.seed;
    let started = Instant::now();
    let ds = dataset::generate(&ctx.cfg, n, seed)?;
    let path = ctx.resolve(&ctx.cfg.dataset.path);
    write_dataset(&ds, &path)?;
    println!(
        "generated {} scenes (N = {}, M = {}, {} resampled) in {:.1} s -> {}",
        ds.t,
        ds.n,
        ds.m,
        ds.meta.resample_count,
        started.elapsed().as_secs_f64(),
        path.display()
    );
    Ok(())
}

fn load_dataset_and_standardizer(path: &Path) -> Result<(Dataset, Standardizer)> {
    let ds = read_dataset(path)?;
    let standardizer = fit_standardizer(&ds, STD_EPSILON)?;
    Ok((ds, standardizer))
}

fn write_loss_curve(curve: &[inn::EpochRecord], path: &Path) -> Result<()> {
    let mut text = String::from("epoch,train_loss,val_loss\n");
    for rec in curve {
        let _ = writeln!(text, "{},{},{}", rec.epoch, rec.train_loss, rec.val_loss);
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn train(ctx: &Ctx, dataset_path: Option<&Path>) -> Result<()> {
    let path = ctx.dataset_path(dataset_path);
    let (ds, standardizer) = load_dataset_and_standardizer(&path)?;
    let split = split_standardized(&ds, &standardizer);
    let mut model = InnModel::new(
        ds.n,
        ds.m,
        ctx.cfg.inn.k,
        ctx.cfg.inn.hidden,
        ctx.cfg.inn.s_clamp,
        ctx.cfg.inn.seed,
    )?;
    let data = TrainSet {
        x_train: &split.x_train,
        y_train: &split.y_train,
        x_val: &split.x_val,
        y_val: &split.y_val,
        n: ds.n,
        m: ds.m,
    };
    let cfg = ctx.train_config();
    let outcome = inn::train(&mut model, &data, &cfg)?;

    let stop_label = match outcome.stop {
        StopReason::EarlyStopped => "early_stopped".to_string(),
        StopReason::ReachedMaxEpochs => "max_epochs".to_string(),
        StopReason::Diverged { epoch } => format!("diverged_at_{epoch}"),
    };
    let meta = serde_json::json!({
        "k": ctx.cfg.inn.k,
        "hidden": ctx.cfg.inn.hidden,
        "seed": ctx.cfg.inn.seed,
        "best_epoch": outcome.best_epoch,
        "best_val_loss": outcome.best_val_loss,
        "stop": stop_label,
        "mixer_clamp_events": outcome.mixer_clamp_events,
        "config": serde_json::from_str::<serde_json::Value>(&ctx.cfg.fingerprint_json()).unwrap(),
    });
    let ckpt_path = ctx.resolve(&ctx.cfg.inn.checkpoint);
    inn::write_checkpoint(&model, &meta.to_string(), &ckpt_path)?;
    write_standardizer(&standardizer, &ctx.resolve("standardizer.bstd"))?;
    write_loss_curve(&outcome.curve, &ctx.resolve(&ctx.cfg.inn.curve_csv))?;

    println!(
        "trained k = {} for {} epochs in {:.1} s: best val loss {:.6} at epoch {} ({}) -> {}",
        ctx.cfg.inn.k,
        outcome.curve.len(),
        outcome.wall_secs,
        outcome.best_val_loss,
        outcome.best_epoch,
        stop_label,
        ckpt_path.display()
    );
    if let StopReason::Diverged { epoch } = outcome.stop {
        return Err(Error::Numerical(format!(
            "training diverged at epoch {epoch}; best checkpoint was written to {}",
            ckpt_path.display()
        )));
    }
    Ok(())
}

pub fn fit_linear(ctx: &Ctx, dataset_path: Option<&Path>) -> Result<()> {
    let path = ctx.dataset_path(dataset_path);
    let (ds, standardizer) = load_dataset_and_standardizer(&path)?;
    let split = split_standardized(&ds, &standardizer);
    let data = TrainData {
        y: &split.y_train,
        x: &split.x_train,
        t: split.train_ids.len(),
        m: ds.m,
        n: ds.n,
    };
    let lin = &ctx.cfg.linear;

    let started = Instant::now();
    let tikhonov = linear::fit_tikhonov(data, &lin.lambda_grid, lin.folds, lin.fold_seed)?;
    let tikhonov_secs = started.elapsed().as_secs_f64();
    let tik_path = ctx.resolve(&lin.tikhonov_path);
    linear::write_model(&tikhonov, &tik_path)?;
    println!(
        "tikhonov: lambda = {:.4e}, cv rmse = {:.6}, wall = {:.1} s -> {}",
        tikhonov.cv_report.chosen_lambda,
        tikhonov
            .cv_report
            .entries
            .iter()
            .map(|e| e.mean_rmse)
            .fold(f64::INFINITY, f64::min),
        tikhonov_secs,
        tik_path.display()
    );

    let started = Instant::now();
    let elasticnet = linear::fit_elasticnet(
        data,
        &lin.lambda_grid,
        &lin.l1_ratio_grid,
        lin.folds,
        lin.fold_seed,
        lin.cd_tol,
        lin.cd_max_iter,
    )?;
    let elasticnet_secs = started.elapsed().as_secs_f64();
    let en_path = ctx.resolve(&lin.elasticnet_path);
    linear::write_model(&elasticnet, &en_path)?;
    println!(
        "elasticnet: lambda = {:.4e}, l1_ratio = {}, cv rmse = {:.6}, wall = {:.1} s -> {}",
        elasticnet.cv_report.chosen_lambda,
        elasticnet.cv_report.chosen_l1_ratio,
        elasticnet
            .cv_report
            .entries
            .iter()
            .map(|e| e.mean_rmse)
            .fold(f64::INFINITY, f64::min),
        elasticnet_secs,
        en_path.display()
    );
    write_standardizer(&standardizer, &ctx.resolve("standardizer.bstd"))?;
    Ok(())
}

fn split_tag(name: &str) -> Result<u8> {
    match name {
        "train" => Ok(dataset::SPLIT_TRAIN),
        "val" => Ok(dataset::SPLIT_VAL),
        other => Err(Error::Config(format!(
            "unknown split '{other}', expected train or val"
        ))),
    }
}

enum AnyModel {
    Inn(Box<InnModel>),
    Linear(linear::LinearModel),
}

fn load_model(path: &Path) -> Result<(AnyModel, String)> {
    let bytes = read_file(path)?;
    match bytes.get(0..4) {
        Some(b"BINN") => {
            let (model, _) = inn::read_checkpoint(path)?;
            Ok((AnyModel::Inn(Box::new(model)), "inn".to_string()))
        }
        Some(b"BLIN") => {
            let model = linear::read_model(path)?;
            let label = match model.kind {
                LinearKind::Tikhonov => "tikhonov",
                LinearKind::ElasticNet => "elasticnet",
            };
            Ok((AnyModel::Linear(model), label.to_string()))
        }
        _ => Err(Error::Format(format!(
            "{}: not a BINN checkpoint or BLIN model",
            path.display()
        ))),
    }
}

pub fn reconstruct(
    ctx: &Ctx,
    model_path: &Path,
    dataset_path: Option<&Path>,
    split: &str,
    predictions_path: Option<&Path>,
) -> Result<()> {
    let tag = split_tag(split)?;
    let ds_path = ctx.dataset_path(dataset_path);
    let (ds, standardizer) = load_dataset_and_standardizer(&ds_path)?;
    let (model, label) = load_model(model_path)?;

    let (model_n, model_m) = match &model {
        AnyModel::Inn(m) => (m.n, m.m),
        AnyModel::Linear(m) => (m.n, m.m),
    };
    if (model_n, model_m) != (ds.n, ds.m) {
        return Err(Error::ShapeMismatch {
            context: format!("model {} vs dataset {}", model_path.display(), ds_path.display()),
            expected: format!("N = {model_n}, M = {model_m}"),
            found: format!("N = {}, M = {}", ds.n, ds.m),
        });
    }

    let row_ids = ds.indices_of(tag);
    if row_ids.is_empty() {
        return Err(Error::Config(format!("split '{split}' has no rows")));
    }
    let mut y_std = Vec::with_capacity(row_ids.len() * ds.m);
    for &i in &row_ids {
        y_std.extend(standardizer.apply_y(ds.y_row(i)));
    }

    let values = match &model {
        AnyModel::Inn(m) => {
            let std_out = inn::reconstruct_rows(m, &y_std, ctx.cfg.inn.n_z, ctx.cfg.inn.seed)?;
            standardizer.invert_x_matrix(&std_out)
        }
        AnyModel::Linear(m) => {
            linear::predict(m, &y_std, &standardizer, ctx.cfg.linear.clip_predictions)?
        }
    };

    let preds = Predictions {
        t: row_ids.len(),
        n: ds.n,
        row_ids,
        values,
        model: label.clone(),
        split: split.to_string(),
    };
    let out_path = match predictions_path {
        Some(p) => p.to_path_buf(),
        None => ctx.resolve(&format!("predictions_{label}.bprd")),
    };
    write_predictions(&preds, &out_path)?;
    println!(
        "reconstructed {} {split} rows with {label} -> {}",
        preds.t,
        out_path.display()
    );
    Ok(())
}

pub fn evaluate(ctx: &Ctx, prediction_paths: &[PathBuf], dataset_path: Option<&Path>) -> Result<()> {
    let ds_path = ctx.dataset_path(dataset_path);
    let ds = read_dataset(&ds_path)?;
    let dcfg = DitherConfig::from_eval(&ctx.cfg.eval)?;
    let (nx, ny) = (ds.meta.config.scene.grid_nx, ds.meta.config.scene.grid_ny);

    let mut scores_csv = String::from("sample_id,model,loglik\n");
    let mut summary_csv = String::from("model,mean_loglik,std_loglik,n\n");
    for path in prediction_paths {
        let preds = read_predictions(path)?;
        if preds.n != ds.n {
            return Err(Error::ShapeMismatch {
                context: format!("{} vs dataset {}", path.display(), ds_path.display()),
                expected: format!("N = {}", ds.n),
                found: format!("N = {}", preds.n),
            });
        }
        let mut gts = Vec::with_capacity(preds.t * ds.n);
        for &id in &preds.row_ids {
            if id >= ds.t {
                return Err(Error::Format(format!(
                    "{}: row id {id} outside dataset with {} rows",
                    path.display(),
                    ds.t
                )));
            }
            gts.extend_from_slice(ds.x_row(id));
        }
        let scored = dither::evaluate_rows(&preds.values, &gts, nx, ny, &preds.row_ids, &dcfg)?;
        let values: Vec<f64> = scored.iter().map(|&(_, s)| s).collect();
        let (mean, std) = dither::mean_std(&values);
        for (id, s) in &scored {
            let _ = writeln!(scores_csv, "{},{},{}", id, preds.model, s);
        }
        let _ = writeln!(summary_csv, "{},{},{},{}", preds.model, mean, std, values.len());
        println!(
            "{}: mean loglik = {:.3} (std {:.3}, n = {})",
            preds.model,
            mean,
            std,
            values.len()
        );
    }
    std::fs::write(ctx.resolve(&ctx.cfg.eval.scores_csv), scores_csv)?;
    std::fs::write(ctx.resolve(&ctx.cfg.eval.summary_csv), summary_csv)?;
    Ok(())
}
