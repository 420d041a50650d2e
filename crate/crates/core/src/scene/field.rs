//! Spatially consistent random fields for shadowing and LOS state.
//!
//! Each field is a zero-mean, unit-variance Gaussian process with exponential
//! autocorrelation `exp(-d / corr_dist)`. It is sampled exactly on a regular
//! grid through a Cholesky factor of the node covariance, then queried by
//! bilinear interpolation. The interpolant is divided by its own standard
//! deviation so every query point keeps a unit marginal variance.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;

use super::channel::{los_probability, path_loss};
use super::{Scene, SceneError};
use crate::seed;

/// Node pitch of the sampling grid.
pub const FIELD_GRID_SPACING_M: f64 = 2.5;

/// Node layout and covariance factor shared by all fields of one scene.
#[derive(Debug, Clone)]
pub struct CorrelatedGrid {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    rho_x: f64,
    rho_y: f64,
    rho_diag: f64,
    /// Lower-triangular Cholesky factor, row-major `n × n`.
    chol: Vec<f64>,
}

fn cholesky(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        let d = d.max(0.0).sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = if d > 0.0 { s / d } else { 0.0 };
        }
        for k in j + 1..n {
            a[j * n + k] = 0.0;
        }
    }
    a
}

impl CorrelatedGrid {
    pub fn new(width_m: f64, length_m: f64, corr_dist_m: f64) -> Self {
        let nx = (width_m / FIELD_GRID_SPACING_M).ceil() as usize + 1;
        let ny = (length_m / FIELD_GRID_SPACING_M).ceil() as usize + 1;
        let dx = width_m / (nx - 1) as f64;
        let dy = length_m / (ny - 1) as f64;
        let n = nx * ny;
        let coord = |i: usize| ((i / ny) as f64 * dx, (i % ny) as f64 * dy);
        let mut cov = vec![0.0; n * n];
        for i in 0..n {
            let (xi, yi) = coord(i);
            for j in 0..=i {
                let (xj, yj) = coord(j);
                let c = (-(xi - xj).hypot(yi - yj) / corr_dist_m).exp();
                cov[i * n + j] = c;
                cov[j * n + i] = c;
            }
            cov[i * n + i] += 1e-12;
        }
        Self {
            nx,
            ny,
            dx,
            dy,
            rho_x: (-dx / corr_dist_m).exp(),
            rho_y: (-dy / corr_dist_m).exp(),
            rho_diag: (-dx.hypot(dy) / corr_dist_m).exp(),
            chol: cholesky(cov, n),
        }
    }

    pub fn for_scene(scene: &Scene) -> Self {
        let c = &scene.config;
        Self::new(c.width_m, c.length_m, c.shadow_corr_dist_m)
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    /// Draws one field realization (`L · z` with `z` i.i.d. standard normal).
    pub fn sample(&self, rng: &mut seed::Rng) -> GridField {
        let n = self.n_nodes();
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let values = (0..n)
            .map(|i| {
                let row = &self.chol[i * n..i * n + i + 1];
                row.iter().zip(&z).map(|(l, z)| l * z).sum()
            })
            .collect();
        GridField { values }
    }

    /// Unit-variance interpolated value of `field` at `(x, y)`.
    pub fn query(&self, field: &GridField, x: f64, y: f64) -> f64 {
        let fx = (x / self.dx).clamp(0.0, (self.nx - 1) as f64);
        let fy = (y / self.dy).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let w00 = (1.0 - tx) * (1.0 - ty);
        let w10 = tx * (1.0 - ty);
        let w01 = (1.0 - tx) * ty;
        let w11 = tx * ty;
        let v = |i: usize, j: usize| field.values[i * self.ny + j];
        let mean = w00 * v(i, j) + w10 * v(i + 1, j) + w01 * v(i, j + 1) + w11 * v(i + 1, j + 1);
        let var = w00 * w00
            + w10 * w10
            + w01 * w01
            + w11 * w11
            + 2.0
                * ((w00 * w10 + w01 * w11) * self.rho_x
                    + (w00 * w01 + w10 * w11) * self.rho_y
                    + (w00 * w11 + w10 * w01) * self.rho_diag);
        mean / var.sqrt()
    }
}

/// Node values of one field realization.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub values: Vec<f64>,
}

/// How the per-link LOS state is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LosMode {
    /// Correlated uniform value compared against the LOS probability.
    #[default]
    Field,
    AlwaysLos,
    AlwaysNlos,
}

/// Per-BS shadowing and LOS-state fields of one channel realization.
#[derive(Debug, Clone)]
pub struct ShadowAndLosFields {
    grid: Arc<CorrelatedGrid>,
    shadow: Vec<GridField>,
    los: Vec<GridField>,
    sigma_los_db: f64,
    sigma_nlos_db: f64,
    los_mode: LosMode,
}

impl ShadowAndLosFields {
    pub fn n_bs(&self) -> usize {
        self.shadow.len()
    }

    pub fn with_los_mode(mut self, mode: LosMode) -> Self {
        self.los_mode = mode;
        self
    }

    /// Unit-variance shadowing value before scaling by the link's sigma.
    pub fn shadow_unit(&self, bs: usize, x: f64, y: f64) -> f64 {
        self.grid.query(&self.shadow[bs], x, y)
    }

    pub fn shadow_db(&self, bs: usize, x: f64, y: f64, los: bool) -> f64 {
        let sigma = if los { self.sigma_los_db } else { self.sigma_nlos_db };
        sigma * self.shadow_unit(bs, x, y)
    }

    /// Correlated uniform value in (0, 1) driving the LOS indicator.
    pub fn los_uniform(&self, bs: usize, x: f64, y: f64) -> f64 {
        0.5 * erfc(-self.grid.query(&self.los[bs], x, y) / std::f64::consts::SQRT_2)
    }

    pub fn is_los(&self, scene: &Scene, bs: usize, x: f64, y: f64) -> bool {
        match self.los_mode {
            LosMode::AlwaysLos => true,
            LosMode::AlwaysNlos => false,
            LosMode::Field => {
                self.los_uniform(bs, x, y) < los_probability(scene, scene.horizontal_distance(bs, x, y))
            }
        }
    }
}

/// Draws the fields of every BS from `seed`. BS `b` uses its own derived
/// stream, so fields of different base stations are independent.
pub fn generate_fields(scene: &Scene, seed: u64) -> ShadowAndLosFields {
    let grid = Arc::new(CorrelatedGrid::for_scene(scene));
    let (shadow, los) = (0..scene.n_bs())
        .map(|b| {
            let mut rng = seed::rng(seed::derive(seed, "fields", &[b as u64]));
            (grid.sample(&mut rng), grid.sample(&mut rng))
        })
        .unzip();
    ShadowAndLosFields {
        grid,
        shadow,
        los,
        sigma_los_db: scene.config.sigma_sf_los_db,
        sigma_nlos_db: scene.config.sigma_sf_nlos_db,
        los_mode: LosMode::Field,
    }
}

/// Path gains (dB) and LOS flags of one position, one entry per BS.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGains {
    pub pg_db: Vec<f64>,
    pub los: Vec<bool>,
}

/// `PG_b = SF_b − PL_b` for every base station. The 3D distance is clamped to
/// the 1 m path-loss domain.
pub fn path_gain_vector(
    scene: &Scene,
    fields: &ShadowAndLosFields,
    position: [f64; 2],
) -> Result<PathGains, SceneError> {
    let [x, y] = position;
    if !scene.contains(x, y) {
        return Err(SceneError::PositionOutOfScene { x, y });
    }
    let n = scene.n_bs();
    let mut pg_db = Vec::with_capacity(n);
    let mut los = Vec::with_capacity(n);
    for b in 0..n {
        let is_los = fields.is_los(scene, b, x, y);
        let pl = path_loss(scene, scene.distance_3d(b, x, y).max(1.0), is_los)?;
        pg_db.push(fields.shadow_db(b, x, y, is_los) - pl);
        los.push(is_los);
    }
    Ok(PathGains { pg_db, los })
}
