use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::Gradients;
use super::{Dense, Model, NeuralError};
use crate::seed;

/// Optimizer hyperparameters for the initial training and the fine-tuning
/// phase. Fine-tuning keeps the weights but starts from a fresh Adam state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub fine_tune_epochs: usize,
    pub fine_tune_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 256,
            epochs: 2000,
            fine_tune_epochs: 600,
            fine_tune_lr: 5e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(self.fine_tune_lr > 0.0 && self.fine_tune_lr.is_finite()) {
            return bad("fine_tune_lr must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.fine_tune_epochs == 0 {
            return bad("fine_tune_epochs must be >= 1");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) {
            return bad("adam_beta1 must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam_beta2 must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Initial,
    FineTune,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-sample loss of every epoch, measured during the epoch.
    pub loss_history: Vec<f64>,
    /// Optimizer steps taken (each updates every parameter tensor once).
    pub steps: usize,
}

/// Squared Euclidean distance between two vectors.
pub fn loss_mse(prediction: &[f64], target: &[f64]) -> Result<f64, NeuralError> {
    if prediction.len() != target.len() {
        return Err(NeuralError::DimensionMismatch { expected: target.len(), got: prediction.len() });
    }
    Ok(prediction.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum())
}

/// Squared distance averaged over the rows of a batch.
pub fn loss_mse_batch(prediction: &Array2<f64>, target: &Array2<f64>) -> Result<f64, NeuralError> {
    if prediction.dim() != target.dim() {
        return Err(NeuralError::DimensionMismatch { expected: target.len(), got: prediction.len() });
    }
    if prediction.nrows() == 0 {
        return Err(NeuralError::EmptyDataset);
    }
    let sq: f64 = prediction.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sq / prediction.nrows() as f64)
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    fn new(model: &Model, lr: f64, cfg: &TrainConfig) -> Self {
        let zeros: Gradients = model
            .layers
            .iter()
            .map(|l| Dense { w: Array2::zeros(l.w.dim()), b: Array1::zeros(l.b.len()) })
            .collect();
        Self {
            lr,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn step(&mut self, model: &mut Model, grads: &Gradients) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.lr;
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, g), m), v) in model.layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(&mut layer.w).and(&g.w).and(&mut m.w).and(&mut v.w).for_each(
                |p, &g, m, v| update(p, g, m, v),
            );
            ndarray::Zip::from(&mut layer.b).and(&g.b).and(&mut m.b).and(&mut v.b).for_each(
                |p, &g, m, v| update(p, g, m, v),
            );
        }
    }
}

/// Mini-batch Adam on the mean squared error. Batches are drawn from a
/// per-epoch shuffle seeded by `config.seed` and the phase.
pub fn train(
    mut model: Model,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    config: &TrainConfig,
    phase: Phase,
) -> Result<(Model, TrainReport), NeuralError> {
    config.validate()?;
    let n = inputs.nrows();
    if n == 0 {
        return Err(NeuralError::EmptyDataset);
    }
    if targets.nrows() != n {
        return Err(NeuralError::DimensionMismatch { expected: n, got: targets.nrows() });
    }
    if inputs.ncols() != model.arch.input_dim {
        return Err(NeuralError::DimensionMismatch { expected: model.arch.input_dim, got: inputs.ncols() });
    }
    if targets.ncols() != model.arch.output_dim {
        return Err(NeuralError::DimensionMismatch { expected: model.arch.output_dim, got: targets.ncols() });
    }
    let (lr, epochs, tag) = match phase {
        Phase::Initial => (config.learning_rate, config.epochs, "shuffle-initial"),
        Phase::FineTune => (config.fine_tune_lr, config.fine_tune_epochs, "shuffle-finetune"),
    };
    let mut adam = Adam::new(&model, lr, config);
    let mut rng = seed::rng(seed::derive(config.seed, tag, &[]));
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let x = inputs.select(Axis(0), batch);
            let y = targets.select(Axis(0), batch);
            let (out, cache) = model.forward_cached(&x)?;
            let diff = &out - &y;
            let batch_loss = diff.iter().map(|d| d * d).sum::<f64>();
            total += batch_loss;
            if !batch_loss.is_finite() {
                return Err(NeuralError::Divergence { epoch, loss: batch_loss });
            }
            let grad_out = diff * (2.0 / batch.len() as f64);
            let grads = model.backward(&cache, &grad_out);
            adam.step(&mut model, &grads);
        }
        let epoch_loss = total / n as f64;
        if !epoch_loss.is_finite() || !model.is_finite() {
            return Err(NeuralError::Divergence { epoch, loss: epoch_loss });
        }
        loss_history.push(epoch_loss);
    }
    Ok((model, TrainReport { loss_history, steps: adam.t as usize }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_model, ModelArch};

    fn linear_task() -> (Array2<f64>, Array2<f64>) {
        let x = Array2::from_shape_fn((100, 1), |(i, _)| -1.0 + 2.0 * i as f64 / 99.0);
        let y = x.mapv(|v| 2.0 * v);
        (x, y)
    }

    #[test]
    fn loss_values() {
        assert_eq!(loss_mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(loss_mse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
        let p = Array2::from_shape_vec((2, 2), vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let t = Array2::from_shape_vec((2, 2), vec![3.0, 4.0, 1.0, 1.0]).unwrap();
        assert_eq!(loss_mse_batch(&p, &t).unwrap(), 12.5);
        assert!(loss_mse(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn fits_linear_map() {
        let (x, y) = linear_task();
        let model = init_model(ModelArch::new(1, 16, 2, 1), 0).unwrap();
        let cfg = TrainConfig { epochs: 200, batch_size: 16, learning_rate: 3e-3, ..Default::default() };
        let (_, report) = train(model, &x, &y, &cfg, Phase::Initial).unwrap();
        let last = *report.loss_history.last().unwrap();
        assert!(last < 1e-3, "final loss {last}");
        for w in report.loss_history[..11].windows(2) {
            assert!(w[1] < w[0], "{:?}", &report.loss_history[..11]);
        }
    }

    #[test]
    fn deterministic_and_step_count() {
        let (x, y) = linear_task();
        let cfg = TrainConfig { epochs: 5, batch_size: 32, seed: 7, ..Default::default() };
        let m = init_model(ModelArch::new(1, 8, 3, 1), 1).unwrap();
        let (a, ra) = train(m.clone(), &x, &y, &cfg, Phase::Initial).unwrap();
        let (b, rb) = train(m.clone(), &x, &y, &cfg, Phase::Initial).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(ra.steps, 5 * 4);
        let one = TrainConfig { epochs: 1, batch_size: 100, ..Default::default() };
        let (_, r) = train(m, &x, &y, &one, Phase::Initial).unwrap();
        assert_eq!(r.steps, 1);
    }

    #[test]
    fn error_paths() {
        let m = init_model(ModelArch::new(1, 4, 1, 1), 0).unwrap();
        let empty = Array2::zeros((0, 1));
        assert!(matches!(
            train(m.clone(), &empty, &empty, &TrainConfig::default(), Phase::Initial),
            Err(NeuralError::EmptyDataset)
        ));
        let x = Array2::zeros((3, 2));
        let y = Array2::zeros((3, 1));
        assert!(matches!(
            train(m.clone(), &x, &y, &TrainConfig::default(), Phase::Initial),
            Err(NeuralError::DimensionMismatch { .. })
        ));
        let x = Array2::from_elem((3, 1), 1.0);
        let y = Array2::from_elem((3, 1), 1e200);
        let cfg = TrainConfig { epochs: 3, ..Default::default() };
        assert!(matches!(train(m, &x, &y, &cfg, Phase::Initial), Err(NeuralError::Divergence { .. })));
    }
}
