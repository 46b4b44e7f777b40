//! Toolkit-wide configuration: one TOML file with `scene`, `physics`,
//! `dataset`, `inn`, `linear`, `eval`, and `ablation` sections. Every field
//! has a reference default, so an empty file (or no file) is a valid
//! configuration. Artifact paths are resolved relative to the output
//! directory by the CLI layer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{FieldComponent, SensorArray, SolverOptions};
use crate::scene::{ChannelSpec, DiskConfig};

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub min_disks: usize,
    pub max_disks: usize,
    pub diameter_min_mm: f64,
    pub diameter_max_mm: f64,
    pub binarize_threshold: f64,
    pub subsample: usize,
    pub length_x_m: f64,
    pub length_y_m: f64,
    pub thickness_m: f64,
    pub sigma_ref: f64,
    pub placement_attempts: usize,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            grid_nx: 30,
            grid_ny: 17,
            min_disks: 30,
            max_disks: 120,
            diameter_min_mm: 4.0,
            diameter_max_mm: 5.0,
            binarize_threshold: 0.25,
            subsample: 8,
            length_x_m: 0.16,
            length_y_m: 0.07,
            thickness_m: 0.005,
            sigma_ref: 3.3e6,
            placement_attempts: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub d_sensor_mm: f64,
    pub sensor_rows: usize,
    pub sensor_cols: usize,
    pub component: String,
    pub applied_current_a: f64,
    pub sigma_floor: f64,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self {
            d_sensor_mm: 5.0,
            sensor_rows: 10,
            sensor_cols: 10,
            component: "z".into(),
            applied_current_a: 100.0,
            sigma_floor: 1e-6,
            solver_tol: 1e-10,
            solver_max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub n_scenes: usize,
    /// Training fraction of the shuffled rows; the rest is validation.
    pub split: f64,
    pub seed: u64,
    pub path: String,
    /// Compute readings from the binarized map instead of the continuous
    /// rasterization (sensitivity switch; default keeps the continuous one).
    pub forward_on_binary: bool,
    /// Resample attempts per scene before a blocked channel becomes fatal.
    pub resample_cap: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            n_scenes: 1000,
            split: 0.8,
            seed: 42,
            path: "dataset.btom".into(),
            forward_on_binary: false,
            resample_cap: 32,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct InnSection {
    pub k: usize,
    pub hidden: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub s_clamp: f64,
    /// Latent samples averaged per reconstruction.
    pub n_z: usize,
    pub seed: u64,
    pub checkpoint: String,
    pub curve_csv: String,
}

impl Default for InnSection {
    fn default() -> Self {
        Self {
            k: 3,
            hidden: 256,
            batch_size: 100,
            learning_rate: 1e-4,
            adam_beta1: 0.8,
            adam_beta2: 0.9,
            adam_eps: 1e-8,
            max_epochs: 200,
            patience: 10,
            s_clamp: 2.0,
            n_z: 1,
            seed: 7,
            checkpoint: "inn.binn".into(),
            curve_csv: "inn_loss.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LinearSection {
    pub lambda_grid: Vec<f64>,
    pub l1_ratio_grid: Vec<f64>,
    pub folds: usize,
    pub fold_seed: u64,
    pub cd_tol: f64,
    pub cd_max_iter: usize,
    pub clip_predictions: bool,
    pub tikhonov_path: String,
    pub elasticnet_path: String,
}

/// 13 points log-spaced over 1e-4 .. 1e2.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..13).map(|i| 10f64.powf(-4.0 + 0.5 * i as f64)).collect()
}

impl Default for LinearSection {
    fn default() -> Self {
        Self {
            lambda_grid: default_lambda_grid(),
            l1_ratio_grid: vec![0.1, 0.5, 0.9],
            folds: 5,
            fold_seed: 99,
            cd_tol: 1e-6,
            cd_max_iter: 1000,
            clip_predictions: false,
            tikhonov_path: "tikhonov.blin".into(),
            elasticnet_path: "elasticnet.blin".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub ensemble_size: usize,
    pub dirichlet_alpha: [f64; 4],
    pub seed: u64,
    /// Smoothed density floor; `None` derives 1/(ensemble_size + 2),
    /// the add-one rule.
    pub epsilon: Option<f64>,
    /// "per-pixel" draws a fraction vector at every pixel, "per-member"
    /// one per ensemble member.
    pub granularity: String,
    pub scores_csv: String,
    pub summary_csv: String,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            ensemble_size: 100,
            dirichlet_alpha: [1.0, 1.0, 1.0, 1.0],
            seed: 1234,
            epsilon: None,
            granularity: "per-pixel".into(),
            scores_csv: "scores.csv".into(),
            summary_csv: "summary.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    pub d_sensor_mm: Vec<f64>,
    pub n_sensors: Vec<usize>,
    pub k: Vec<usize>,
    /// Explicit sensor indices overriding the checkerboard subsampling.
    pub sensor_indices: Option<Vec<usize>>,
    pub csv: String,
    /// Re-evaluate the dither score on each cell's validation split.
    #[serde(default = "default_true")]
    pub with_dither_score: bool,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self {
            d_sensor_mm: vec![5.0, 25.0],
            n_sensors: vec![100, 50],
            k: vec![1, 3],
            sensor_indices: None,
            csv: "ablation.csv".into(),
            with_dither_score: true,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene: SceneSection,
    pub physics: PhysicsSection,
    pub dataset: DatasetSection,
    pub inn: InnSection,
    pub linear: LinearSection,
    pub eval: EvalSection,
    pub ablation: AblationSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn channel_spec(&self) -> ChannelSpec {
        ChannelSpec {
            length_x: self.scene.length_x_m,
            length_y: self.scene.length_y_m,
            thickness: self.scene.thickness_m,
            grid_nx: self.scene.grid_nx,
            grid_ny: self.scene.grid_ny,
            sigma_ref: self.scene.sigma_ref,
        }
    }

    pub fn disk_config(&self) -> DiskConfig {
        DiskConfig {
            min_disks: self.scene.min_disks,
            max_disks: self.scene.max_disks,
            r_min: self.scene.diameter_min_mm * 1e-3 / 2.0,
            r_max: self.scene.diameter_max_mm * 1e-3 / 2.0,
            max_attempts: self.scene.placement_attempts,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            sigma_floor: self.physics.sigma_floor,
            tol: self.physics.solver_tol,
            max_iter: self.physics.solver_max_iter,
        }
    }

    pub fn field_component(&self) -> Result<FieldComponent> {
        FieldComponent::parse(&self.physics.component)
    }

    pub fn sensor_array(&self) -> Result<SensorArray> {
        SensorArray::lattice(
            &self.channel_spec(),
            self.physics.sensor_rows,
            self.physics.sensor_cols,
            self.physics.d_sensor_mm * 1e-3,
            self.field_component()?,
        )
    }

    /// Map dimensionality N.
    pub fn n_map(&self) -> usize {
        self.scene.grid_nx * self.scene.grid_ny
    }

    /// Measurement dimensionality M.
    pub fn m_sensors(&self) -> usize {
        self.physics.sensor_rows * self.physics.sensor_cols
    }

    pub fn validate(&self) -> Result<()> {
        self.channel_spec().validate()?;
        self.disk_config().validate()?;
        if !(0.0..=1.0).contains(&self.scene.binarize_threshold) {
            return Err(Error::Config("binarize_threshold must be in [0, 1]".into()));
        }
        if self.scene.subsample == 0 {
            return Err(Error::Config("subsample must be at least 1".into()));
        }
        self.field_component()?;
        if self.physics.d_sensor_mm <= 0.0 {
            return Err(Error::Config("d_sensor_mm must be positive".into()));
        }
        if self.physics.applied_current_a <= 0.0 {
            return Err(Error::Config("applied_current_a must be positive".into()));
        }
        if !(0.0 < self.dataset.split && self.dataset.split <= 1.0) {
            return Err(Error::Config("dataset split must be in (0, 1]".into()));
        }
        let n = self.n_map();
        let m = self.m_sensors();
        if n <= m {
            return Err(Error::Config(format!(
                "map dimensionality N = {n} must exceed sensor count M = {m}"
            )));
        }
        if self.inn.k == 0 || self.inn.hidden == 0 || self.inn.batch_size == 0 {
            return Err(Error::Config(
                "inn k, hidden and batch_size must be positive".into(),
            ));
        }
        if !(0.0 < self.inn.adam_beta1 && self.inn.adam_beta1 < 1.0)
            || !(0.0 < self.inn.adam_beta2 && self.inn.adam_beta2 < 1.0)
        {
            return Err(Error::Config("adam betas must lie in (0, 1)".into()));
        }
        if self.inn.learning_rate <= 0.0 || self.inn.adam_eps <= 0.0 || self.inn.s_clamp <= 0.0 {
            return Err(Error::Config(
                "learning_rate, adam_eps and s_clamp must be positive".into(),
            ));
        }
        if self.inn.n_z == 0 {
            return Err(Error::Config("n_z must be at least 1".into()));
        }
        if self.linear.lambda_grid.is_empty()
            || self.linear.lambda_grid.iter().any(|&l| l <= 0.0)
        {
            return Err(Error::Config(
                "lambda_grid must be non-empty with positive entries".into(),
            ));
        }
        if self
            .linear
            .l1_ratio_grid
            .iter()
            .any(|&r| !(0.0..=1.0).contains(&r))
        {
            return Err(Error::Config("l1_ratio entries must lie in [0, 1]".into()));
        }
        if self.linear.folds < 2 {
            return Err(Error::Config("cross-validation needs at least 2 folds".into()));
        }
        if self.eval.ensemble_size == 0 {
            return Err(Error::Config("ensemble_size must be at least 1".into()));
        }
        if self.eval.dirichlet_alpha.iter().any(|&a| a <= 0.0) {
            return Err(Error::Config(
                "dirichlet_alpha entries must be positive".into(),
            ));
        }
        if let Some(eps) = self.eval.epsilon {
            if !(0.0 < eps && eps < 0.5) {
                return Err(Error::Config("eval epsilon must lie in (0, 0.5)".into()));
            }
        }
        match self.eval.granularity.as_str() {
            "per-pixel" | "per-member" => {}
            other => {
                return Err(Error::Config(format!(
                    "eval granularity '{other}' must be per-pixel or per-member"
                )))
            }
        }
        Ok(())
    }

    /// Deterministic JSON fingerprint embedded in artifact metadata.
    pub fn fingerprint_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_setup() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_map(), 510);
        assert_eq!(cfg.m_sensors(), 100);
        assert_eq!(cfg.linear.lambda_grid.len(), 13);
        assert!((cfg.linear.lambda_grid[0] - 1e-4).abs() < 1e-12);
        assert!((cfg.linear.lambda_grid[12] - 1e2).abs() < 1e-9);
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
[scene]
grid_nx = 10
grid_ny = 6

[physics]
d_sensor_mm = 25.0
sensor_rows = 4
sensor_cols = 4

[dataset]
n_scenes = 50
seed = 9
"#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.scene.grid_nx, 10);
        assert_eq!(cfg.physics.d_sensor_mm, 25.0);
        assert_eq!(cfg.dataset.n_scenes, 50);
        // Untouched sections keep defaults.
        assert_eq!(cfg.inn.k, 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[scene]\ngird_nx = 10\n";
        assert!(RunConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn n_must_exceed_m() {
        let text = r#"
[scene]
grid_nx = 5
grid_ny = 5

[physics]
sensor_rows = 5
sensor_cols = 5
"#;
        assert!(matches!(
            RunConfig::from_toml_str(text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn fingerprint_is_deterministic() {
        let a = RunConfig::default().fingerprint_json();
        let b = RunConfig::default().fingerprint_json();
        assert_eq!(a, b);
    }
}
