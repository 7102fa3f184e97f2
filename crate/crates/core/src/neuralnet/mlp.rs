use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Activation;
use crate::matrix::{gemm_ab, gemm_abt, gemm_atb};
use crate::rng::Rng;

/// Fully connected layer; `weights` is `outputs × inputs`, row-major, so row
/// `j` holds the incoming weights of unit `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    /// He-style uniform initialization `U(−√(6/fan_in), √(6/fan_in))`, zero bias.
    pub fn init(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let limit = libm::sqrt(6.0 / inputs as f64);
        let weights = (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect();
        Self { inputs, outputs, weights, bias: vec![0.0; outputs] }
    }

    #[inline]
    pub fn weight(&self, unit: usize, input: usize) -> f64 {
        self.weights[unit * self.inputs + input]
    }

    pub(crate) fn is_well_formed(&self) -> bool {
        self.inputs > 0
            && self.outputs > 0
            && self.weights.len() == self.inputs * self.outputs
            && self.bias.len() == self.outputs
    }
}

/// Hidden layers with a shared activation followed by a linear scalar output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub activation: Activation,
    pub layers: Vec<Layer>,
}

/// Per-layer pre-activations and activations from the last forward pass.
#[derive(Debug, Default, Clone)]
pub(crate) struct MlpCache {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Mlp {
    pub fn new(inputs: usize, hidden: &[usize], activation: Activation, rng: &mut Rng) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = inputs;
        for &h in hidden.iter().chain(core::iter::once(&1)) {
            layers.push(Layer::init(fan_in, h, rng));
            fan_in = h;
        }
        Self { activation, layers }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn first_layer(&self) -> &Layer {
        &self.layers[0]
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub(crate) fn block_sizes(&self, out: &mut Vec<usize>) {
        for l in &self.layers {
            out.push(l.weights.len());
            out.push(l.bias.len());
        }
    }

    pub(crate) fn blocks_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        for l in &mut self.layers {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
    }

    /// Forward pass over `rows` inputs laid out row-major with stride `inputs()`.
    /// Returns the scalar output per row (kept in the cache).
    pub(crate) fn forward<'c>(&self, x: &[f64], rows: usize, cache: &'c mut MlpCache) -> &'c [f64] {
        let n_layers = self.layers.len();
        cache.pre.resize_with(n_layers, Vec::new);
        cache.post.resize_with(n_layers, Vec::new);
        for (li, layer) in self.layers.iter().enumerate() {
            let (done, rest) = cache.post.split_at_mut(li);
            let input: &[f64] = if li == 0 { x } else { &done[li - 1] };
            let pre = &mut cache.pre[li];
            pre.resize(rows * layer.outputs, 0.0);
            for r in 0..rows {
                pre[r * layer.outputs..(r + 1) * layer.outputs].copy_from_slice(&layer.bias);
            }
            gemm_abt(rows, layer.inputs, layer.outputs, input, &layer.weights, pre, true);
            let post = &mut rest[0];
            post.resize(rows * layer.outputs, 0.0);
            if li + 1 == n_layers {
                post.copy_from_slice(pre);
            } else {
                let act = self.activation;
                for (o, z) in post.iter_mut().zip(pre.iter()) {
                    *o = act.value(*z);
                }
            }
        }
        &cache.post[n_layers - 1]
    }

    /// Backpropagates `dout` (one value per row) through the cached forward
    /// pass. Parameter gradients are written into `grads` (two blocks per
    /// layer, overwritten). If `dx` is given, input gradients are written there.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        rows: usize,
        cache: &mut MlpCache,
        dout: &[f64],
        grads: &mut [Vec<f64>],
        mut dx: Option<&mut [f64]>,
    ) {
        let n_layers = self.layers.len();
        let MlpCache { pre, post, delta, delta_prev } = cache;
        delta.clear();
        delta.extend_from_slice(dout);
        for li in (0..n_layers).rev() {
            let layer = &self.layers[li];
            if li + 1 != n_layers {
                let act = self.activation;
                for (d, z) in delta.iter_mut().zip(pre[li].iter()) {
                    *d *= act.derivative(*z);
                }
            }
            let input: &[f64] = if li == 0 { x } else { &post[li - 1] };
            let (gw, gb) = {
                let (a, b) = grads[2 * li..2 * li + 2].split_at_mut(1);
                (&mut a[0], &mut b[0])
            };
            gemm_atb(layer.outputs, rows, layer.inputs, delta, input, gw, false);
            gb.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..rows {
                for (g, d) in gb.iter_mut().zip(&delta[r * layer.outputs..(r + 1) * layer.outputs]) {
                    *g += d;
                }
            }
            if li > 0 {
                delta_prev.resize(rows * layer.inputs, 0.0);
                gemm_ab(rows, layer.outputs, layer.inputs, delta, &layer.weights, delta_prev, false);
                core::mem::swap(delta, delta_prev);
            } else if let Some(dx) = dx.as_deref_mut() {
                gemm_ab(rows, layer.outputs, layer.inputs, delta, &layer.weights, dx, false);
            }
        }
    }

    /// Scalar output for a single input row.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut cur: Vec<f64> = x.to_vec();
        let n = self.layers.len();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut next = layer.bias.clone();
            for (j, out) in next.iter_mut().enumerate() {
                let row = &layer.weights[j * layer.inputs..(j + 1) * layer.inputs];
                *out += row.iter().zip(&cur).map(|(w, a)| w * a).sum::<f64>();
                if li + 1 != n {
                    *out = self.activation.value(*out);
                }
            }
            cur = next;
        }
        cur[0]
    }

    /// Per-unit output influence of the first hidden layer:
    /// `|W_L| · |W_{L−1}| ⋯ |W_2|`, one entry per first-layer unit.
    pub fn unit_influence(&self) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut z: Vec<f64> = self.layers[last].weights.iter().map(|w| w.abs()).collect();
        for li in (1..last).rev() {
            let layer = &self.layers[li];
            let mut next = vec![0.0; layer.inputs];
            for (j, zj) in z.iter().enumerate() {
                for (i, n) in next.iter_mut().enumerate() {
                    *n += zj * layer.weight(j, i).abs();
                }
            }
            z = next;
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn batched_forward_matches_single_row_eval() {
        let mut r = rng::from_seed(3);
        let mlp = Mlp::new(4, &[7, 5], Activation::Softplus, &mut r);
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut cache = MlpCache::default();
        let out = mlp.forward(&x, 3, &mut cache).to_vec();
        for row in 0..3 {
            assert!((out[row] - mlp.eval(&x[row * 4..(row + 1) * 4])).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_influence_of_two_layer_net() {
        let mlp = Mlp {
            activation: Activation::Relu,
            layers: vec![
                Layer { inputs: 1, outputs: 2, weights: vec![1.0, 1.0], bias: vec![0.0; 2] },
                Layer { inputs: 2, outputs: 2, weights: vec![1.0, -2.0, 3.0, 0.5], bias: vec![0.0; 2] },
                Layer { inputs: 2, outputs: 1, weights: vec![-1.0, 2.0], bias: vec![0.0] },
            ],
        };
        // |w_out| · |W2| = [1, 2] · [[1, 2], [3, 0.5]] = [7, 3]
        assert_eq!(mlp.unit_influence(), vec![7.0, 3.0]);
    }
}
