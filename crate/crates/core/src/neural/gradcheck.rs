//! Central-difference check of the analytic MSE gradients.
//!
//! A ReLU network is piecewise linear in each single parameter, so the loss is
//! piecewise quadratic and a central difference is exact up to rounding as
//! long as the perturbation does not move any unit across its kink. Inputs
//! with a pre-activation closer than [`KINK_MARGIN`] to zero are resampled by
//! jittering, and parameters whose ±step flips an activation are replaced by
//! another draw.

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use super::model::flatten_grads;
use super::Model;
use crate::seed;

pub const FD_STEP: f64 = 1e-5;
const KINK_MARGIN: f64 = 1e-3;
/// Gradients smaller than this are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Inputs or parameters redrawn because of a nearby ReLU kink.
    pub resampled: usize,
}

fn row(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row vector")
}

fn loss(model: &Model, x: &Array2<f64>, t: &[f64]) -> f64 {
    let out = model.forward_batch(x).expect("dimensions checked");
    out.iter().zip(t).map(|(o, t)| (o - t) * (o - t)).sum()
}

fn relu_mask(model: &Model, x: &Array2<f64>) -> Vec<bool> {
    let (_, cache) = model.forward_cached(x).expect("dimensions checked");
    cache.relu_preactivations().map(|z| z > 0.0).collect()
}

/// Compares analytic gradients with central differences on a random subset of
/// at least 50 parameters (1% of the total for larger models).
pub fn finite_difference_check(model: &Model, input: &[f64], target: &[f64], seed: u64) -> GradCheckReport {
    let mut rng = seed::rng(seed::derive(seed, "gradcheck", &[]));
    let mut resampled = 0;
    let mut x_vec = input.to_vec();
    for _ in 0..100 {
        let (_, cache) = model.forward_cached(&row(&x_vec)).expect("input dimension");
        if cache.relu_preactivations().all(|z| z.abs() >= KINK_MARGIN) {
            break;
        }
        resampled += 1;
        for v in &mut x_vec {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += 0.1 * e;
        }
    }
    let x = row(&x_vec);
    let (out, cache) = model.forward_cached(&x).expect("input dimension");
    let grad_out = (&out - &row(target)) * 2.0;
    let analytic = flatten_grads(&model.backward(&cache, &grad_out));
    let base_mask = relu_mask(model, &x);

    let total = model.param_count();
    let want = (total / 100).max(50).min(total);
    let mut order = rand::seq::index::sample(&mut rng, total, total).into_vec();
    let mut probe = model.clone();
    let mut max_rel_error: f64 = 0.0;
    let mut checked = 0;
    while checked < want {
        let Some(i) = order.pop() else { break };
        let theta = model.param(i);
        probe.set_param(i, theta + FD_STEP);
        let plus_mask = relu_mask(&probe, &x);
        let lp = loss(&probe, &x, target);
        probe.set_param(i, theta - FD_STEP);
        let minus_mask = relu_mask(&probe, &x);
        let lm = loss(&probe, &x, target);
        probe.set_param(i, theta);
        if plus_mask != base_mask || minus_mask != base_mask {
            resampled += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * FD_STEP);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        max_rel_error = max_rel_error.max(rel);
        checked += 1;
    }
    GradCheckReport { max_rel_error, checked, resampled }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_model, ModelArch};
    use rand::Rng;

    #[test]
    fn small_random_models_pass() {
        for s in 0..20u64 {
            let model = init_model(ModelArch::new(4, 8, 2, 2), s).unwrap();
            let mut rng = seed::rng(s + 100);
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = finite_difference_check(&model, &x, &t, s);
            assert!(r.checked >= 50.min(model.param_count()));
            assert!(r.max_rel_error < 1e-4, "seed {s}: {r:?}");
        }
    }

    #[test]
    fn zero_model_output_bias() {
        let model = Model::zeros(ModelArch::new(4, 8, 2, 2)).unwrap();
        let (out, cache) = model.forward_cached(&row(&[0.3, -0.2, 0.9, 0.1])).unwrap();
        let t = [0.5, -0.25];
        let g = model.backward(&cache, &((&out - &row(&t)) * 2.0));
        let gb = &g.last().unwrap().b;
        let n = model.param_count();
        let x = row(&[0.3, -0.2, 0.9, 0.1]);
        for k in 0..2 {
            let i = n - 2 + k;
            let mut p = model.clone();
            p.set_param(i, FD_STEP);
            let lp = loss(&p, &x, &t);
            p.set_param(i, -FD_STEP);
            let lm = loss(&p, &x, &t);
            let numeric = (lp - lm) / (2.0 * FD_STEP);
            assert!((numeric - gb[k]).abs() < 1e-9, "{numeric} vs {}", gb[k]);
        }
    }

    #[test]
    fn kink_inputs_are_resampled() {
        // Zero input puts every first-layer unit exactly on its kink.
        let model = init_model(ModelArch::new(4, 8, 2, 2), 3).unwrap();
        let r = finite_difference_check(&model, &[0.0; 4], &[0.2, 0.1], 3);
        assert!(r.resampled > 0);
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }
}
