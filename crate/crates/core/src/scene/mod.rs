//! Indoor-factory scene, statistical path-gain channel and fingerprint datasets.
//!
//! Coordinates are meters. The horizontal plane spans `x ∈ [0, width_m]` and
//! `y ∈ [0, length_m]`; base stations sit on a regular grid at `bs_height_m`
//! and user equipment at `ue_height_m`.

mod channel;
mod dataset;
mod field;

pub use channel::{los_probability, los_decay_length, path_loss};
pub use dataset::{
    generate_pool, generate_pool_with, partition_indices, partition_pool, read_dataset, subsample_bs, write_dataset,
    Dataset, Partition, Sample,
};
pub use field::{
    generate_fields, path_gain_vector, CorrelatedGrid, GridField, LosMode, PathGains,
    ShadowAndLosFields, FIELD_GRID_SPACING_M,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene config: {field} {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("3D distance {0} m is below the 1 m path-loss domain")]
    DistanceTooSmall(f64),
    #[error("position ({x}, {y}) lies outside the scene")]
    PositionOutOfScene { x: f64, y: f64 },
    #[error("unknown or unordered base-station index {0}")]
    UnknownBsIndex(usize),
    #[error("pool of {pool} samples cannot provide two disjoint sets of {n}")]
    PoolTooSmall { pool: usize, n: usize },
    #[error("dataset file, line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Geometry and channel constants of the factory hall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub width_m: f64,
    pub length_m: f64,
    pub height_m: f64,
    pub bs_spacing_m: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    pub carrier_ghz: f64,
    pub clutter_density: f64,
    pub clutter_height_m: f64,
    pub clutter_size_m: f64,
    pub shadow_corr_dist_m: f64,
    pub sigma_sf_los_db: f64,
    pub sigma_sf_nlos_db: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width_m: 60.0,
            length_m: 120.0,
            height_m: 10.0,
            bs_spacing_m: 20.0,
            bs_height_m: 8.0,
            ue_height_m: 1.5,
            carrier_ghz: 3.5,
            clutter_density: 0.6,
            clutter_height_m: 6.0,
            clutter_size_m: 2.0,
            shadow_corr_dist_m: 10.0,
            sigma_sf_los_db: 4.0,
            sigma_sf_nlos_db: 7.2,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        let positive = [
            ("width_m", self.width_m),
            ("length_m", self.length_m),
            ("height_m", self.height_m),
            ("bs_spacing_m", self.bs_spacing_m),
            ("bs_height_m", self.bs_height_m),
            ("ue_height_m", self.ue_height_m),
            ("carrier_ghz", self.carrier_ghz),
            ("clutter_height_m", self.clutter_height_m),
            ("clutter_size_m", self.clutter_size_m),
            ("shadow_corr_dist_m", self.shadow_corr_dist_m),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SceneError::InvalidConfig {
                    field,
                    reason: format!("must be a positive finite number, got {v}"),
                });
            }
        }
        for (field, v) in [
            ("sigma_sf_los_db", self.sigma_sf_los_db),
            ("sigma_sf_nlos_db", self.sigma_sf_nlos_db),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SceneError::InvalidConfig {
                    field,
                    reason: format!("must be non-negative, got {v}"),
                });
            }
        }
        if !(self.clutter_density > 0.0 && self.clutter_density < 1.0) {
            return Err(SceneError::InvalidConfig {
                field: "clutter_density",
                reason: format!("must lie in (0, 1), got {}", self.clutter_density),
            });
        }
        if !(self.ue_height_m < self.clutter_height_m && self.clutter_height_m < self.bs_height_m) {
            return Err(SceneError::InvalidConfig {
                field: "clutter_height_m",
                reason: format!(
                    "requires ue_height_m < clutter_height_m < bs_height_m, got {} / {} / {}",
                    self.ue_height_m, self.clutter_height_m, self.bs_height_m
                ),
            });
        }
        if self.bs_height_m > self.height_m {
            return Err(SceneError::InvalidConfig {
                field: "bs_height_m",
                reason: format!("exceeds the hall height {}", self.height_m),
            });
        }
        Ok(())
    }
}

/// A validated configuration plus the base-station layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub config: SceneConfig,
    pub bs_positions: Vec<[f64; 3]>,
}

impl Scene {
    pub fn n_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn center(&self) -> [f64; 2] {
        [self.config.width_m / 2.0, self.config.length_m / 2.0]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.config.width_m).contains(&x) && (0.0..=self.config.length_m).contains(&y)
    }

    pub fn horizontal_distance(&self, bs: usize, x: f64, y: f64) -> f64 {
        let b = self.bs_positions[bs];
        (x - b[0]).hypot(y - b[1])
    }

    pub fn distance_3d(&self, bs: usize, x: f64, y: f64) -> f64 {
        let dz = self.bs_positions[bs][2] - self.config.ue_height_m;
        self.horizontal_distance(bs, x, y).hypot(dz)
    }
}

fn grid_axis(extent: f64, spacing: f64) -> Vec<f64> {
    let n = ((extent / spacing).floor() as usize).max(1);
    let margin = (extent - (n - 1) as f64 * spacing) / 2.0;
    (0..n).map(|i| margin + i as f64 * spacing).collect()
}

/// Builds the scene: a symmetric grid with `bs_spacing_m` pitch, centered in
/// the hall. Rows run along the length axis; BS `r * n_cols + c` sits at the
/// `r`-th width coordinate and `c`-th length coordinate. The default config
/// yields 3 rows × 6 columns = 18 base stations.
pub fn build_scene(config: SceneConfig) -> Result<Scene, SceneError> {
    config.validate()?;
    let xs = grid_axis(config.width_m, config.bs_spacing_m);
    let ys = grid_axis(config.length_m, config.bs_spacing_m);
    let bs_positions = xs
        .iter()
        .flat_map(|&x| ys.iter().map(move |&y| [x, y, config.bs_height_m]))
        .collect();
    Ok(Scene { config, bs_positions })
}
