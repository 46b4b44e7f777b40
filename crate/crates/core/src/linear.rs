//! Classical linear reconstructions: multi-output Tikhonov (ridge) and
//! ElasticNet regressions from readings to maps, with regularization
//! strength chosen by k-fold cross-validation on the training split.
//!
//! Both solve, per output feature f,
//!
//! ```text
//! min_w  1/2 ||x_f - Y w||^2  +  lambda ( rho |w|_1 + (1 - rho)/2 |w|_2^2 )
//! ```
//!
//! with rho = 0 for Tikhonov, which then has the closed form
//! (Y^T Y + lambda I) w = Y^T x_f on mean-centered columns. ElasticNet runs
//! per-output coordinate descent with soft-thresholding on the cached Gram
//! matrix, warm-started along the descending lambda path.
//!
//! Model files use the `BLIN` container: magic, u32 version, u8 kind,
//! u64 N, u64 M, f64 lambda_l2, f64 lambda_l1, N*M f64 weights (row per
//! x-feature), N f64 bias, JSON cv_report.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Standardizer;
use crate::error::{Error, Result};
use crate::io::{read_file, Reader, Writer};
use crate::linalg::{cholesky_factor, cholesky_solve, dot};
use crate::par;
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearKind {
    Tikhonov,
    ElasticNet,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CvEntry {
    pub lambda: f64,
    pub l1_ratio: f64,
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
    pub convergence_warnings: usize,
}

/// Record of the cross-validation protocol: the grid, per-candidate scores,
/// the seeded fold assignment, and the winner. RMSE is taken over all
/// (row, feature) entries of the held-out fold in standardized units.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CvReport {
    pub folds: usize,
    pub fold_seed: u64,
    pub entries: Vec<CvEntry>,
    pub chosen_lambda: f64,
    pub chosen_l1_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub n: usize,
    pub m: usize,
    /// N x M, row f holds the reading coefficients for map feature f.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub lambda_l2: f64,
    pub lambda_l1: f64,
    pub cv_report: CvReport,
}

/// Borrowed training matrices, both standardized, row-major.
#[derive(Clone, Copy)]
pub struct TrainData<'a> {
    /// T x M readings.
    pub y: &'a [f64],
    /// T x N maps.
    pub x: &'a [f64],
    pub t: usize,
    pub m: usize,
    pub n: usize,
}

impl<'a> TrainData<'a> {
    fn validate(&self, folds: usize) -> Result<()> {
        if self.y.len() != self.t * self.m || self.x.len() != self.t * self.n {
            return Err(Error::ShapeMismatch {
                context: "linear training matrices".into(),
                expected: format!("{}x{} and {}x{}", self.t, self.m, self.t, self.n),
                found: format!("len {} and len {}", self.y.len(), self.x.len()),
            });
        }
        if self.t < folds {
            return Err(Error::Config(format!(
                "{} training rows cannot be split into {folds} folds",
                self.t
            )));
        }
        Ok(())
    }
}

struct Centered {
    mean_y: Vec<f64>,
    mean_x: Vec<f64>,
    m: usize,
    n: usize,
    /// Gram matrix Yc^T Yc, M x M.
    gram: Vec<f64>,
    /// Cross matrix Yc^T Xc, M x N.
    cross: Vec<f64>,
}

fn center_and_cache(data: TrainData<'_>, rows: &[usize]) -> Centered {
    let (m, n) = (data.m, data.n);
    let t = rows.len();
    let mut mean_y = vec![0.0; m];
    let mut mean_x = vec![0.0; n];
    for &r in rows {
        for (c, v) in data.y[r * m..(r + 1) * m].iter().enumerate() {
            mean_y[c] += v;
        }
        for (c, v) in data.x[r * n..(r + 1) * n].iter().enumerate() {
            mean_x[c] += v;
        }
    }
    let inv = 1.0 / t as f64;
    mean_y.iter_mut().for_each(|v| *v *= inv);
    mean_x.iter_mut().for_each(|v| *v *= inv);

    let mut yc = Vec::with_capacity(t * m);
    let mut xc = Vec::with_capacity(t * n);
    for &r in rows {
        yc.extend(
            data.y[r * m..(r + 1) * m]
                .iter()
                .zip(&mean_y)
                .map(|(v, mu)| v - mu),
        );
        xc.extend(
            data.x[r * n..(r + 1) * n]
                .iter()
                .zip(&mean_x)
                .map(|(v, mu)| v - mu),
        );
    }

    let mut gram = vec![0.0; m * m];
    for r in 0..t {
        let row = &yc[r * m..(r + 1) * m];
        for i in 0..m {
            let yi = row[i];
            if yi == 0.0 {
                continue;
            }
            for (g, &yj) in gram[i * m..i * m + m].iter_mut().zip(row) {
                *g += yi * yj;
            }
        }
    }
    let mut cross = vec![0.0; m * n];
    for r in 0..t {
        let yrow = &yc[r * m..(r + 1) * m];
        let xrow = &xc[r * n..(r + 1) * n];
        for (j, &yv) in yrow.iter().enumerate() {
            if yv == 0.0 {
                continue;
            }
            for (cv, &xv) in cross[j * n..j * n + n].iter_mut().zip(xrow) {
                *cv += yv * xv;
            }
        }
    }

    Centered {
        mean_y,
        mean_x,
        m,
        n,
        gram,
        cross,
    }
}

/// Closed-form ridge on the cached Gram/cross matrices. Returns (weights
/// N x M, bias N).
fn ridge_from_cache(cache: &Centered, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (m, n) = (cache.m, cache.n);
    let mut reg = cache.gram.clone();
    for i in 0..m {
        reg[i * m + i] += lambda;
    }
    cholesky_factor(&mut reg, m)?;
    let weight_rows = par::map_indexed(n, |f| {
        let mut rhs: Vec<f64> = (0..m).map(|j| cache.cross[j * n + f]).collect();
        cholesky_solve(&reg, m, &mut rhs);
        rhs
    });
    let mut weights = vec![0.0; n * m];
    let mut bias = vec![0.0; n];
    for (f, w) in weight_rows.into_iter().enumerate() {
        bias[f] = cache.mean_x[f] - dot(&w, &cache.mean_y);
        weights[f * m..(f + 1) * m].copy_from_slice(&w);
    }
    Ok((weights, bias))
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// One coordinate-descent sweep for a single output; returns the largest
/// coefficient change. `gw` caches G w and is updated incrementally.
pub fn elastic_net_sweep(
    gram: &[f64],
    m: usize,
    c: &[f64],
    w: &mut [f64],
    gw: &mut [f64],
    lambda: f64,
    ratio: f64,
) -> f64 {
    let l1 = lambda * ratio;
    let l2 = lambda * (1.0 - ratio);
    let mut max_delta = 0.0f64;
    for i in 0..m {
        let gii = gram[i * m + i];
        let denom = gii + l2;
        let z = c[i] - gw[i] + gii * w[i];
        let new = if denom > 0.0 {
            soft_threshold(z, l1) / denom
        } else {
            0.0
        };
        let delta = new - w[i];
        if delta != 0.0 {
            for (gwl, &gli) in gw.iter_mut().zip(gram[i * m..(i + 1) * m].iter()) {
                *gwl += gli * delta;
            }
            w[i] = new;
            max_delta = max_delta.max(delta.abs());
        }
    }
    max_delta
}

/// ElasticNet objective for one output on the cached quantities:
/// 1/2 w^T G w - c^T w + 1/2 |x_f|^2 + lambda (rho |w|_1 + (1-rho)/2 |w|^2).
pub fn elastic_net_objective(
    gram: &[f64],
    m: usize,
    c: &[f64],
    x_sq: f64,
    w: &[f64],
    lambda: f64,
    ratio: f64,
) -> f64 {
    let mut quad = 0.0;
    for i in 0..m {
        quad += w[i] * dot(&gram[i * m..(i + 1) * m], w);
    }
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let l2: f64 = w.iter().map(|v| v * v).sum();
    0.5 * quad - dot(c, w) + 0.5 * x_sq + lambda * (ratio * l1 + (1.0 - ratio) / 2.0 * l2)
}

/// Coordinate descent to `tol` (max coefficient change) or `max_iter`
/// sweeps. Returns the warning flag when the cap is hit.
fn elastic_net_single(
    gram: &[f64],
    m: usize,
    c: &[f64],
    w: &mut [f64],
    lambda: f64,
    ratio: f64,
    tol: f64,
    max_iter: usize,
) -> bool {
    let mut gw = vec![0.0; m];
    for i in 0..m {
        if w[i] != 0.0 {
            for (gwl, &gli) in gw.iter_mut().zip(gram[i * m..(i + 1) * m].iter()) {
                *gwl += gli * w[i];
            }
        }
    }
    for _ in 0..max_iter {
        if elastic_net_sweep(gram, m, c, w, &mut gw, lambda, ratio) < tol {
            return false;
        }
    }
    true
}

/// ElasticNet over the whole output block, warm-started along descending
/// lambda; returns per-lambda (weights, bias, warnings).
#[allow(clippy::too_many_arguments)]
fn elastic_net_path(
    cache: &Centered,
    lambdas_desc: &[f64],
    ratio: f64,
    tol: f64,
    max_iter: usize,
) -> Vec<(Vec<f64>, Vec<f64>, usize)> {
    let (m, n) = (cache.m, cache.n);
    // Each output keeps its own warm-start vector across the path.
    let per_output: Vec<Vec<(Vec<f64>, bool)>> = par::map_indexed(n, |f| {
        let c: Vec<f64> = (0..m).map(|j| cache.cross[j * n + f]).collect();
        let mut w = vec![0.0; m];
        let mut states = Vec::with_capacity(lambdas_desc.len());
        for &lambda in lambdas_desc {
            let warned = elastic_net_single(&cache.gram, m, &c, &mut w, lambda, ratio, tol, max_iter);
            states.push((w.clone(), warned));
        }
        states
    });

    lambdas_desc
        .iter()
        .enumerate()
        .map(|(li, _)| {
            let mut weights = vec![0.0; n * m];
            let mut bias = vec![0.0; n];
            let mut warnings = 0usize;
            for (f, states) in per_output.iter().enumerate() {
                let (w, warned) = &states[li];
                weights[f * m..(f + 1) * m].copy_from_slice(w);
                bias[f] = cache.mean_x[f] - dot(w, &cache.mean_y);
                if *warned {
                    warnings += 1;
                }
            }
            (weights, bias, warnings)
        })
        .collect()
}

fn predict_std_into(weights: &[f64], bias: &[f64], m: usize, n: usize, y_row: &[f64], out: &mut [f64]) {
    for f in 0..n {
        out[f] = bias[f] + dot(&weights[f * m..(f + 1) * m], y_row);
    }
}

/// Predict standardized x rows for standardized y rows.
pub fn predict_std(model: &LinearModel, y_rows: &[f64]) -> Result<Vec<f64>> {
    if y_rows.len() % model.m != 0 {
        return Err(Error::ShapeMismatch {
            context: "linear predict".into(),
            expected: format!("row length {}", model.m),
            found: format!("total length {}", y_rows.len()),
        });
    }
    let rows = y_rows.len() / model.m;
    let mut out = vec![0.0; rows * model.n];
    par::for_each_row_mut(&mut out, model.n, |r, row| {
        predict_std_into(
            &model.weights,
            &model.bias,
            model.m,
            model.n,
            &y_rows[r * model.m..(r + 1) * model.m],
            row,
        );
    });
    Ok(out)
}

/// Predict and de-standardize to original units; optional clamp to [0, 1].
pub fn predict(
    model: &LinearModel,
    y_rows_std: &[f64],
    standardizer: &Standardizer,
    clip: bool,
) -> Result<Vec<f64>> {
    let std_out = predict_std(model, y_rows_std)?;
    let mut out = standardizer.invert_x_matrix(&std_out);
    if clip {
        for v in out.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Seeded shuffled fold assignment: contiguous chunks of a permutation.
fn fold_assignment(t: usize, folds: usize, fold_seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..t).collect();
    let mut rng = seeds::rng(fold_seed, seeds::STREAM_FOLDS, 0);
    for i in (1..t).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let base = t / folds;
    let extra = t % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    out
}

fn held_out_rmse(
    data: TrainData<'_>,
    held: &[usize],
    weights: &[f64],
    bias: &[f64],
) -> f64 {
    let (m, n) = (data.m, data.n);
    let mut sq = 0.0;
    let mut pred = vec![0.0; n];
    for &r in held {
        predict_std_into(weights, bias, m, n, &data.y[r * m..(r + 1) * m], &mut pred);
        for (p, x) in pred.iter().zip(&data.x[r * n..(r + 1) * n]) {
            let d = p - x;
            sq += d * d;
        }
    }
    (sq / (held.len() * n) as f64).sqrt()
}

/// Select the grid entry with the lowest mean RMSE; ties break toward the
/// larger lambda (entries must be visited in ascending lambda order).
fn select_best(entries: &[CvEntry]) -> usize {
    let mut best = 0;
    for (i, e) in entries.iter().enumerate() {
        if e.mean_rmse <= entries[best].mean_rmse {
            best = i;
        }
    }
    best
}

pub fn fit_tikhonov(
    data: TrainData<'_>,
    lambda_grid: &[f64],
    folds: usize,
    fold_seed: u64,
) -> Result<LinearModel> {
    data.validate(folds)?;
    if lambda_grid.is_empty() || lambda_grid.iter().any(|&l| l <= 0.0) {
        return Err(Error::Config("lambda grid must be non-empty and positive".into()));
    }
    let mut grid = lambda_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let fold_rows = fold_assignment(data.t, folds, fold_seed);
    let all_rows: Vec<usize> = (0..data.t).collect();
    let mut fold_scores = vec![Vec::with_capacity(folds); grid.len()];
    for held in &fold_rows {
        let kept: Vec<usize> = all_rows
            .iter()
            .copied()
            .filter(|r| !held.contains(r))
            .collect();
        let cache = center_and_cache(data, &kept);
        for (li, &lambda) in grid.iter().enumerate() {
            let (w, b) = ridge_from_cache(&cache, lambda)?;
            fold_scores[li].push(held_out_rmse(data, held, &w, &b));
        }
    }
    let entries: Vec<CvEntry> = grid
        .iter()
        .zip(fold_scores)
        .map(|(&lambda, fold_rmse)| {
            let mean_rmse = fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64;
            CvEntry {
                lambda,
                l1_ratio: 0.0,
                fold_rmse,
                mean_rmse,
                convergence_warnings: 0,
            }
        })
        .collect();
    let best = select_best(&entries);
    let lambda = entries[best].lambda;

    let cache = center_and_cache(data, &all_rows);
    let (weights, bias) = ridge_from_cache(&cache, lambda)?;
    Ok(LinearModel {
        kind: LinearKind::Tikhonov,
        n: data.n,
        m: data.m,
        weights,
        bias,
        lambda_l2: lambda,
        lambda_l1: 0.0,
        cv_report: CvReport {
            folds,
            fold_seed,
            entries,
            chosen_lambda: lambda,
            chosen_l1_ratio: 0.0,
        },
    })
}

#[allow(clippy::too_many_arguments)]
pub fn fit_elasticnet(
    data: TrainData<'_>,
    lambda_grid: &[f64],
    l1_ratio_grid: &[f64],
    folds: usize,
    fold_seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<LinearModel> {
    data.validate(folds)?;
    if lambda_grid.is_empty() || lambda_grid.iter().any(|&l| l <= 0.0) {
        return Err(Error::Config("lambda grid must be non-empty and positive".into()));
    }
    if l1_ratio_grid.is_empty() || l1_ratio_grid.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
        return Err(Error::Config("l1_ratio grid must lie in [0, 1]".into()));
    }
    let mut lambdas_desc = lambda_grid.to_vec();
    lambdas_desc.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let fold_rows = fold_assignment(data.t, folds, fold_seed);
    let all_rows: Vec<usize> = (0..data.t).collect();

    // entries[(ratio, lambda)] accumulated over folds.
    let mut scores: Vec<Vec<Vec<f64>>> =
        vec![vec![Vec::with_capacity(folds); lambdas_desc.len()]; l1_ratio_grid.len()];
    let mut warn_counts: Vec<Vec<usize>> = vec![vec![0; lambdas_desc.len()]; l1_ratio_grid.len()];
    for held in &fold_rows {
        let kept: Vec<usize> = all_rows
            .iter()
            .copied()
            .filter(|r| !held.contains(r))
            .collect();
        let cache = center_and_cache(data, &kept);
        for (ri, &ratio) in l1_ratio_grid.iter().enumerate() {
            let path = elastic_net_path(&cache, &lambdas_desc, ratio, tol, max_iter);
            for (li, (w, b, warns)) in path.iter().enumerate() {
                scores[ri][li].push(held_out_rmse(data, held, w, b));
                warn_counts[ri][li] += warns;
            }
        }
    }

    // Flatten in ascending-lambda order so ties break toward larger lambda,
    // then toward larger l1_ratio.
    let mut entries = Vec::new();
    for (ri, &ratio) in l1_ratio_grid.iter().enumerate() {
        for li in (0..lambdas_desc.len()).rev() {
            let fold_rmse = scores[ri][li].clone();
            let mean_rmse = fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64;
            entries.push(CvEntry {
                lambda: lambdas_desc[li],
                l1_ratio: ratio,
                fold_rmse,
                mean_rmse,
                convergence_warnings: warn_counts[ri][li],
            });
        }
    }
    entries.sort_by(|a, b| {
        a.lambda
            .partial_cmp(&b.lambda)
            .unwrap()
            .then(a.l1_ratio.partial_cmp(&b.l1_ratio).unwrap())
    });
    let best = select_best(&entries);
    let (lambda, ratio) = (entries[best].lambda, entries[best].l1_ratio);

    let cache = center_and_cache(data, &all_rows);
    let path = elastic_net_path(&cache, &[lambda], ratio, tol, max_iter);
    let (weights, bias, final_warns) = path.into_iter().next().unwrap();
    if final_warns > 0 {
        // Best iterate is kept; the warning lands in the report.
        eprintln!(
            "warning: elastic net final fit hit the iteration cap on {final_warns} outputs"
        );
    }
    Ok(LinearModel {
        kind: LinearKind::ElasticNet,
        n: data.n,
        m: data.m,
        weights,
        bias,
        lambda_l2: lambda * (1.0 - ratio),
        lambda_l1: lambda * ratio,
        cv_report: CvReport {
            folds,
            fold_seed,
            entries,
            chosen_lambda: lambda,
            chosen_l1_ratio: ratio,
        },
    })
}

pub fn write_model(model: &LinearModel, path: &Path) -> Result<()> {
    let mut w = Writer::new(b"BLIN", 1);
    w.u8(match model.kind {
        LinearKind::Tikhonov => 0,
        LinearKind::ElasticNet => 1,
    });
    w.u64(model.n as u64);
    w.u64(model.m as u64);
    w.f64(model.lambda_l2);
    w.f64(model.lambda_l1);
    w.f64_slice(&model.weights);
    w.f64_slice(&model.bias);
    w.json(&serde_json::to_string(&model.cv_report).expect("report serializes"));
    w.write_to(path)
}

pub fn read_model(path: &Path) -> Result<LinearModel> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(&bytes, &path.display().to_string());
    r.expect_magic(b"BLIN", 1)?;
    let kind = match r.u8()? {
        0 => LinearKind::Tikhonov,
        1 => LinearKind::ElasticNet,
        other => {
            return Err(Error::Format(format!(
                "{}: unknown linear model kind {other}",
                path.display()
            )))
        }
    };
    let n = r.u64()? as usize;
    let m = r.u64()? as usize;
    let lambda_l2 = r.f64()?;
    let lambda_l1 = r.f64()?;
    let weights = r.f64_vec(n * m)?;
    let bias = r.f64_vec(n)?;
    let cv_report: CvReport = serde_json::from_str(&r.json()?)
        .map_err(|e| Error::Format(format!("{}: bad cv report: {e}", path.display())))?;
    Ok(LinearModel {
        kind,
        n,
        m,
        weights,
        bias,
        lambda_l2,
        lambda_l1,
        cv_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_data(t: usize, m: usize, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = seeds::rng(seed, 17, 0);
        let y: Vec<f64> = (0..t * m).map(|_| rng.random_range(-1.0..1.0)).collect();
        // x = linear map of y plus noise
        let w: Vec<f64> = (0..m * n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let mut x = vec![0.0; t * n];
        for r in 0..t {
            for f in 0..n {
                let mut v = 0.0;
                for j in 0..m {
                    v += y[r * m + j] * w[j * n + f];
                }
                x[r * n + f] = v + 0.05 * rng.random_range(-1.0..1.0);
            }
        }
        (y, x)
    }

    #[test]
    fn identity_task_recovers_identity() {
        let mut rng = seeds::rng(3, 4, 5);
        let (t, m) = (60, 4);
        let y: Vec<f64> = (0..t * m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = y.clone();
        let data = TrainData { y: &y, x: &x, t, m, n: m };
        let model = fit_tikhonov(data, &[1e-10], 5, 1).unwrap();
        for f in 0..m {
            for j in 0..m {
                let expect = if f == j { 1.0 } else { 0.0 };
                let got = model.weights[f * m + j];
                assert!((got - expect).abs() < 1e-6, "w[{f},{j}] = {got}");
            }
        }
    }

    #[test]
    fn infinite_shrinkage_predicts_the_mean() {
        let (y, x) = random_data(50, 3, 6, 9);
        let data = TrainData { y: &y, x: &x, t: 50, m: 3, n: 6 };
        let model = fit_tikhonov(data, &[1e12], 5, 1).unwrap();
        assert!(model.weights.iter().all(|w| w.abs() < 1e-9));
        // Zero standardized input predicts the bias = train mean of x.
        let pred = predict_std(&model, &vec![0.0; 3]).unwrap();
        for f in 0..6 {
            let mean = (0..50).map(|r| x[r * 6 + f]).sum::<f64>() / 50.0;
            assert!((pred[f] - mean).abs() < 1e-9);
        }
    }

    #[test]
    fn toy_system_matches_hand_solved_normal_equations() {
        // 3 samples, 2 readings, 1 output, lambda = 1.
        let y = vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let x = vec![2.0, -1.0, 1.0];
        let data = TrainData { y: &y, x: &x, t: 3, m: 2, n: 1 };
        let model = fit_tikhonov(data, &[1.0], 3, 1).unwrap();

        // Independent dense solve of (Yc^T Yc + I) w = Yc^T xc.
        let mean_y = [2.0 / 3.0, 2.0 / 3.0];
        let mean_x = 2.0 / 3.0;
        let yc: Vec<f64> = (0..3)
            .flat_map(|r| [y[r * 2] - mean_y[0], y[r * 2 + 1] - mean_y[1]])
            .collect();
        let xc: Vec<f64> = x.iter().map(|v| v - mean_x).collect();
        let mut a = [0.0f64; 4];
        let mut b = [0.0f64; 2];
        for r in 0..3 {
            for i in 0..2 {
                for j in 0..2 {
                    a[i * 2 + j] += yc[r * 2 + i] * yc[r * 2 + j];
                }
                b[i] += yc[r * 2 + i] * xc[r];
            }
        }
        a[0] += 1.0;
        a[3] += 1.0;
        let det = a[0] * a[3] - a[1] * a[2];
        let w0 = (b[0] * a[3] - b[1] * a[1]) / det;
        let w1 = (a[0] * b[1] - a[2] * b[0]) / det;
        assert!((model.weights[0] - w0).abs() < 1e-10);
        assert!((model.weights[1] - w1).abs() < 1e-10);
        let bias = mean_x - (w0 * mean_y[0] + w1 * mean_y[1]);
        assert!((model.bias[0] - bias).abs() < 1e-10);
    }

    #[test]
    fn elasticnet_with_zero_l1_matches_ridge() {
        let (y, x) = random_data(80, 5, 7, 21);
        let data = TrainData { y: &y, x: &x, t: 80, m: 5, n: 7 };
        let lambda = 0.7;
        let ridge = fit_tikhonov(data, &[lambda], 5, 2).unwrap();
        let en = fit_elasticnet(data, &[lambda], &[0.0], 5, 2, 1e-9, 10_000).unwrap();
        for (a, b) in en.weights.iter().zip(&ridge.weights) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn huge_l1_kills_all_coefficients() {
        let (y, x) = random_data(40, 4, 5, 31);
        let data = TrainData { y: &y, x: &x, t: 40, m: 4, n: 5 };
        let en = fit_elasticnet(data, &[1e9], &[1.0], 4, 2, 1e-8, 1000).unwrap();
        assert!(en.weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn scalar_lasso_matches_soft_threshold_formula() {
        let t = 20;
        let mut rng = seeds::rng(8, 8, 8);
        let y: Vec<f64> = (0..t).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = y.iter().map(|v| 0.8 * v + 0.1).collect();
        let data = TrainData { y: &y, x: &x, t, m: 1, n: 1 };
        let lambda = 0.3;
        let en = fit_elasticnet(data, &[lambda], &[1.0], 4, 3, 1e-12, 1000).unwrap();

        let my = y.iter().sum::<f64>() / t as f64;
        let mx = x.iter().sum::<f64>() / t as f64;
        let num: f64 = y.iter().zip(&x).map(|(a, b)| (a - my) * (b - mx)).sum();
        let den: f64 = y.iter().map(|a| (a - my) * (a - my)).sum();
        let expect = soft_threshold(num, lambda) / den;
        assert!((en.weights[0] - expect).abs() < 1e-8);
    }

    #[test]
    fn sweeps_never_increase_the_objective() {
        let (y, x) = random_data(60, 6, 1, 44);
        let rows: Vec<usize> = (0..60).collect();
        let data = TrainData { y: &y, x: &x, t: 60, m: 6, n: 1 };
        let cache = center_and_cache(data, &rows);
        let c: Vec<f64> = (0..6).map(|j| cache.cross[j]).collect();
        let mx = (0..60).map(|r| x[r]).sum::<f64>() / 60.0;
        let x_sq: f64 = (0..60).map(|r| (x[r] - mx) * (x[r] - mx)).sum();
        let (lambda, ratio) = (0.5, 0.4);
        let mut w = vec![0.0; 6];
        let mut gw = vec![0.0; 6];
        let mut prev = elastic_net_objective(&cache.gram, 6, &c, x_sq, &w, lambda, ratio);
        for _ in 0..30 {
            elastic_net_sweep(&cache.gram, 6, &c, &mut w, &mut gw, lambda, ratio);
            let obj = elastic_net_objective(&cache.gram, 6, &c, x_sq, &w, lambda, ratio);
            assert!(obj <= prev + 1e-12, "{obj} > {prev}");
            prev = obj;
        }
    }

    #[test]
    fn ridge_train_rmse_monotone_in_lambda() {
        let (y, x) = random_data(70, 5, 4, 55);
        let data = TrainData { y: &y, x: &x, t: 70, m: 5, n: 4 };
        let rows: Vec<usize> = (0..70).collect();
        let cache = center_and_cache(data, &rows);
        let mut last = -1.0;
        for lambda in [1e-4, 1e-2, 1.0, 100.0] {
            let (w, b) = ridge_from_cache(&cache, lambda).unwrap();
            let rmse = held_out_rmse(data, &rows, &w, &b);
            assert!(rmse >= last, "rmse {rmse} decreased at lambda {lambda}");
            last = rmse;
        }
    }

    #[test]
    fn cv_is_deterministic() {
        let (y, x) = random_data(50, 4, 6, 66);
        let data = TrainData { y: &y, x: &x, t: 50, m: 4, n: 6 };
        let grid = [0.01, 0.1, 1.0];
        let a = fit_tikhonov(data, &grid, 5, 12).unwrap();
        let b = fit_tikhonov(data, &grid, 5, 12).unwrap();
        assert_eq!(
            serde_json::to_string(&a.cv_report).unwrap(),
            serde_json::to_string(&b.cv_report).unwrap()
        );
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn ties_break_toward_larger_lambda() {
        let entries = vec![
            CvEntry { lambda: 0.1, l1_ratio: 0.0, fold_rmse: vec![], mean_rmse: 1.0, convergence_warnings: 0 },
            CvEntry { lambda: 1.0, l1_ratio: 0.0, fold_rmse: vec![], mean_rmse: 1.0, convergence_warnings: 0 },
            CvEntry { lambda: 10.0, l1_ratio: 0.0, fold_rmse: vec![], mean_rmse: 2.0, convergence_warnings: 0 },
        ];
        assert_eq!(select_best(&entries), 1);
    }

    #[test]
    fn batch_prediction_is_rowwise() {
        let (y, x) = random_data(30, 3, 4, 77);
        let data = TrainData { y: &y, x: &x, t: 30, m: 3, n: 4 };
        let model = fit_tikhonov(data, &[0.1], 3, 1).unwrap();
        let rows = vec![0.3, -0.2, 0.9, -1.0, 0.5, 0.0];
        let batch = predict_std(&model, &rows).unwrap();
        let one = predict_std(&model, &rows[0..3]).unwrap();
        let two = predict_std(&model, &rows[3..6]).unwrap();
        assert_eq!(&batch[0..4], &one[..]);
        assert_eq!(&batch[4..8], &two[..]);
    }

    #[test]
    fn model_file_round_trip() {
        let (y, x) = random_data(25, 3, 4, 88);
        let data = TrainData { y: &y, x: &x, t: 25, m: 3, n: 4 };
        let model = fit_elasticnet(data, &[0.5], &[0.5], 4, 9, 1e-7, 500).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.blin");
        write_model(&model, &path).unwrap();
        assert_eq!(read_model(&path).unwrap(), model);
    }
}
