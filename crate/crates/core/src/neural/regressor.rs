//! Trained models bundled with the normalizer they were trained under.

use ndarray::Array2;

use super::{Model, NeuralError, Normalizer};
use crate::exec::Execution;

/// Signals → position model (the network being improved by selection).
#[derive(Debug, Clone, PartialEq)]
pub struct Locator {
    pub model: Model,
    pub normalizer: Normalizer,
}

impl Locator {
    /// Positions in meters for raw path-gain rows (dB). No clipping.
    pub fn predict_positions(&self, features: &Array2<f64>, exec: Execution) -> Result<Array2<f64>, NeuralError> {
        let z = self.normalizer.apply_features(features)?;
        let out = self.model.predict(&z, exec)?;
        Ok(self.normalizer.invert_positions(&out))
    }
}

/// Position → signals model used to estimate fingerprints of unlabeled
/// candidate positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    pub model: Model,
    pub normalizer: Normalizer,
}

impl SignalModel {
    /// Path gains in dB for positions in meters.
    pub fn predict_signals(&self, positions: &Array2<f64>, exec: Execution) -> Result<Array2<f64>, NeuralError> {
        if positions.ncols() != 2 {
            return Err(NeuralError::DimensionMismatch { expected: 2, got: positions.ncols() });
        }
        let z = self.normalizer.apply_positions(positions);
        let out = self.model.predict(&z, exec)?;
        self.normalizer.invert_features(&out)
    }
}
