use ndarray::{Array1, Array2, Axis};

use super::NeuralError;
use crate::scene::{Dataset, Scene};

pub const STD_FLOOR: f64 = 1e-6;

/// Per-feature standardization plus an affine map of scene coordinates onto
/// `[-1, 1]` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub feature_means: Array1<f64>,
    pub feature_stds: Array1<f64>,
    pub position_center: [f64; 2],
    pub position_half_extent: [f64; 2],
}

pub fn fit_normalizer(dataset: &Dataset, scene: &Scene) -> Result<Normalizer, NeuralError> {
    if dataset.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let f = dataset.feature_matrix();
    let feature_means = f.mean_axis(Axis(0)).expect("non-empty");
    let feature_stds = f.std_axis(Axis(0), 0.0).mapv(|s| s.max(STD_FLOOR));
    Ok(Normalizer {
        feature_means,
        feature_stds,
        position_center: scene.center(),
        position_half_extent: [scene.config.width_m / 2.0, scene.config.length_m / 2.0],
    })
}

impl Normalizer {
    pub fn n_features(&self) -> usize {
        self.feature_means.len()
    }

    fn check(&self, cols: usize) -> Result<(), NeuralError> {
        if cols != self.n_features() {
            return Err(NeuralError::DimensionMismatch { expected: self.n_features(), got: cols });
        }
        Ok(())
    }

    pub fn apply_features(&self, f: &Array2<f64>) -> Result<Array2<f64>, NeuralError> {
        self.check(f.ncols())?;
        Ok((f - &self.feature_means) / &self.feature_stds)
    }

    pub fn invert_features(&self, z: &Array2<f64>) -> Result<Array2<f64>, NeuralError> {
        self.check(z.ncols())?;
        Ok(z * &self.feature_stds + &self.feature_means)
    }

    pub fn apply_positions(&self, p: &Array2<f64>) -> Array2<f64> {
        let mut out = p.clone();
        for mut row in out.rows_mut() {
            for k in 0..2 {
                row[k] = (row[k] - self.position_center[k]) / self.position_half_extent[k];
            }
        }
        out
    }

    pub fn invert_positions(&self, z: &Array2<f64>) -> Array2<f64> {
        let mut out = z.clone();
        for mut row in out.rows_mut() {
            for k in 0..2 {
                row[k] = row[k] * self.position_half_extent[k] + self.position_center[k];
            }
        }
        out
    }
}
