use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;

use super::{ModelArch, NeuralError, SkipPattern};
use crate::exec::Execution;
use crate::seed;

/// Fully connected layer: `y = x · w + b` with `w` of shape `(fan_in, fan_out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch: ModelArch,
    pub layers: Vec<Dense>,
}

/// Gradients with the same layout as [`Model::layers`].
pub type Gradients = Vec<Dense>;

/// Layer inputs and pre-activations recorded by [`Model::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

impl ForwardCache {
    /// Pre-activations of every ReLU unit, flattened.
    pub fn relu_preactivations(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.pre.len();
        self.pre[..n - 1].iter().flat_map(|z| z.iter().copied())
    }
}

#[derive(Debug, Clone, Copy)]
enum Block {
    Plain(usize),
    Pair(usize, usize),
}

fn relu(mut z: Array2<f64>) -> Array2<f64> {
    z.mapv_inplace(|v| v.max(0.0));
    z
}

fn relu_backward(mut g: Array2<f64>, z: &Array2<f64>) -> Array2<f64> {
    g.zip_mut_with(z, |g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    g
}

/// Fan-in scaled uniform weights in `±sqrt(6 / fan_in)`, zero biases.
pub fn init_model(arch: ModelArch, seed: u64) -> Result<Model, NeuralError> {
    arch.validate()?;
    let mut rng = seed::rng(seed::derive(seed, "init", &[]));
    let layers = arch
        .layer_shapes()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let a = (6.0 / fan_in as f64).sqrt();
            Dense {
                w: Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-a..a)),
                b: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(Model { arch, layers })
}

impl Model {
    /// Model of the given shape with every weight and bias zero.
    pub fn zeros(arch: ModelArch) -> Result<Model, NeuralError> {
        arch.validate()?;
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| Dense { w: Array2::zeros((i, o)), b: Array1::zeros(o) })
            .collect();
        Ok(Model { arch, layers })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn blocks(&self) -> Vec<Block> {
        let n = self.arch.n_hidden;
        match self.arch.skip_pattern {
            SkipPattern::Plain => (1..=n).map(Block::Plain).collect(),
            SkipPattern::ConsecutivePairs => {
                let mut blocks: Vec<Block> = (0..n / 2).map(|p| Block::Pair(2 * p + 1, 2 * p + 2)).collect();
                if n % 2 == 1 {
                    blocks.push(Block::Plain(n));
                }
                blocks
            }
        }
    }

    fn check_input(&self, cols: usize) -> Result<(), NeuralError> {
        if cols != self.arch.input_dim {
            return Err(NeuralError::DimensionMismatch { expected: self.arch.input_dim, got: cols });
        }
        Ok(())
    }

    fn affine(&self, l: usize, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.layers[l].w) + &self.layers[l].b
    }

    /// Batched forward pass without caching; one row per sample.
    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>, NeuralError> {
        self.check_input(x.ncols())?;
        let mut h = relu(self.affine(0, x));
        for block in self.blocks() {
            h = match block {
                Block::Plain(l) => relu(self.affine(l, &h)),
                Block::Pair(a, b) => {
                    let t = relu(self.affine(a, &h));
                    relu(self.affine(b, &t) + &h)
                }
            };
        }
        Ok(self.affine(self.layers.len() - 1, &h))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row vector");
        Ok(self.forward_batch(&x)?.into_raw_vec_and_offset().0)
    }

    /// Batched inference in fixed-size row chunks, optionally in parallel.
    /// Each output row depends only on its input row.
    pub fn predict(&self, x: &Array2<f64>, exec: Execution) -> Result<Array2<f64>, NeuralError> {
        const CHUNK: usize = 2048;
        self.check_input(x.ncols())?;
        let n = x.nrows();
        let chunks = n.div_ceil(CHUNK);
        let parts = exec.map_indexed(chunks, |c| {
            let rows = x.slice(s![c * CHUNK..((c + 1) * CHUNK).min(n), ..]).to_owned();
            self.forward_batch(&rows)
        });
        let mut out = Array2::zeros((n, self.arch.output_dim));
        for (c, part) in parts.into_iter().enumerate() {
            let part = part?;
            out.slice_mut(s![c * CHUNK..c * CHUNK + part.nrows(), ..]).assign(&part);
        }
        Ok(out)
    }

    /// Forward pass recording what backpropagation needs.
    pub fn forward_cached(&self, x: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache), NeuralError> {
        self.check_input(x.ncols())?;
        let n_layers = self.layers.len();
        let mut inputs = vec![Array2::zeros((0, 0)); n_layers];
        let mut pre = vec![Array2::zeros((0, 0)); n_layers];
        let z0 = self.affine(0, x);
        inputs[0] = x.clone();
        let mut h = relu(z0.clone());
        pre[0] = z0;
        for block in self.blocks() {
            match block {
                Block::Plain(l) => {
                    let z = self.affine(l, &h);
                    inputs[l] = h;
                    h = relu(z.clone());
                    pre[l] = z;
                }
                Block::Pair(a, b) => {
                    let za = self.affine(a, &h);
                    let t = relu(za.clone());
                    let zb = self.affine(b, &t) + &h;
                    inputs[a] = h;
                    inputs[b] = t;
                    pre[a] = za;
                    h = relu(zb.clone());
                    pre[b] = zb;
                }
            }
        }
        let out_l = n_layers - 1;
        let out = self.affine(out_l, &h);
        inputs[out_l] = h;
        pre[out_l] = out.clone();
        Ok((out, ForwardCache { inputs, pre }))
    }

    /// Parameter gradients given `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Array2<f64>) -> Gradients {
        let n_layers = self.layers.len();
        let mut grads: Vec<Option<Dense>> = vec![None; n_layers];
        let dense_grad = |l: usize, gz: &Array2<f64>| Dense {
            w: cache.inputs[l].t().dot(gz),
            b: gz.sum_axis(Axis(0)),
        };
        let out_l = n_layers - 1;
        grads[out_l] = Some(dense_grad(out_l, grad_out));
        let mut gh = grad_out.dot(&self.layers[out_l].w.t());
        for block in self.blocks().into_iter().rev() {
            match block {
                Block::Plain(l) => {
                    let gz = relu_backward(gh, &cache.pre[l]);
                    grads[l] = Some(dense_grad(l, &gz));
                    gh = gz.dot(&self.layers[l].w.t());
                }
                Block::Pair(a, b) => {
                    let gzb = relu_backward(gh, &cache.pre[b]);
                    grads[b] = Some(dense_grad(b, &gzb));
                    let gt = gzb.dot(&self.layers[b].w.t());
                    let gza = relu_backward(gt, &cache.pre[a]);
                    grads[a] = Some(dense_grad(a, &gza));
                    gh = gza.dot(&self.layers[a].w.t()) + &gzb;
                }
            }
        }
        let gz0 = relu_backward(gh, &cache.pre[0]);
        grads[0] = Some(dense_grad(0, &gz0));
        grads.into_iter().map(|g| g.expect("every layer visited")).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    /// Flat parameter access in layer order, weights (row-major) before bias.
    pub fn param(&self, mut i: usize) -> f64 {
        for l in &self.layers {
            if i < l.w.len() {
                return l.w.as_slice().expect("standard layout")[i];
            }
            i -= l.w.len();
            if i < l.b.len() {
                return l.b[i];
            }
            i -= l.b.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set_param(&mut self, mut i: usize, v: f64) {
        for l in &mut self.layers {
            if i < l.w.len() {
                l.w.as_slice_mut().expect("standard layout")[i] = v;
                return;
            }
            i -= l.w.len();
            if i < l.b.len() {
                l.b[i] = v;
                return;
            }
            i -= l.b.len();
        }
        panic!("parameter index out of range")
    }

    /// Every weight and bias in [`Model::param`] order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
            .collect()
    }
}

pub(crate) fn flatten_grads(grads: &Gradients) -> Vec<f64> {
    grads.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_counts_and_determinism() {
        let a = init_model(ModelArch::locator(18), 1).unwrap();
        assert_eq!(a.param_count(), 104_162);
        assert_eq!(a, init_model(ModelArch::locator(18), 1).unwrap());
        assert_ne!(a, init_model(ModelArch::locator(18), 2).unwrap());
        let b = init_model(ModelArch::signal_model(18), 1).unwrap();
        assert_eq!(b.param_count(), 104_178);
        assert!(a.layers.iter().all(|l| l.b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = Model::zeros(ModelArch::locator(18)).unwrap();
        assert_eq!(m.forward(&[1.5; 18]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let m = init_model(ModelArch::locator(4), 0).unwrap();
        assert!(matches!(
            m.forward(&[0.0; 5]),
            Err(NeuralError::DimensionMismatch { expected: 4, got: 5 })
        ));
    }

    #[test]
    fn bounded_inputs_give_finite_outputs() {
        let m = init_model(ModelArch::locator(18), 3).unwrap();
        let mut rng = seed::rng(3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..18).map(|_| rng.random_range(-10.0..=10.0)).collect();
            assert!(m.forward(&x).unwrap().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn cached_forward_matches_plain_and_predict_is_chunk_invariant() {
        let m = init_model(ModelArch::locator(6), 5).unwrap();
        let mut rng = seed::rng(5);
        let x = Array2::from_shape_simple_fn((5000, 6), || rng.random_range(-2.0..2.0));
        let plain = m.forward_batch(&x).unwrap();
        let (cached, _) = m.forward_cached(&x).unwrap();
        assert_eq!(plain, cached);
        let seq = m.predict(&x, Execution::Sequential).unwrap();
        let par = m.predict(&x, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        assert!((&seq - &plain).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn flat_param_access() {
        let mut m = init_model(ModelArch::new(3, 4, 2, 2), 0).unwrap();
        let p = m.flat_params();
        assert_eq!(p.len(), m.param_count());
        for (i, v) in p.iter().enumerate() {
            assert_eq!(m.param(i), *v);
        }
        m.set_param(p.len() - 1, 7.0);
        assert_eq!(m.layers.last().unwrap().b[1], 7.0);
    }
}
