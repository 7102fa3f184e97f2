//! Small feed-forward surrogate networks with exact gradients.
//!
//! [`train`] fits a [`SurrogateNet`] to a perturbation dataset with Adam,
//! an L1 penalty on the first-layer weights and early stopping on the
//! validation split. Smooth nets also expose exact input Hessians, which the
//! gradient-based detector reads mixed partials from.

mod glm;
mod gradcheck;
mod jet;
mod mlp;
pub(crate) mod optim;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use glm::{train_glm_with_products, GlmFit};
pub use gradcheck::{gradient_check, gradient_check_piecewise, GradientCheck};
pub use mlp::{Layer, Mlp};
pub use optim::{EpochLog, TargetScale, TrainingLog};

use crate::perturb::PerturbationDataset;
use crate::{rng, Matrix};
pub(crate) use mlp::MlpCache;
use optim::{FitSettings, Regressor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("training and validation splits must be nonempty")]
    EmptySplit,
    #[error("input has {got} features, network expects {expected}")]
    Arity { expected: usize, got: usize },
    #[error("non-smooth activation: {0:?} has no usable higher derivatives")]
    NonSmooth(Activation),
    #[error("probe sits on an activation kink; pick another probe")]
    UnsafeProbe,
    #[error("invalid network configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("interaction index {index} out of range for {dim} features")]
    InteractionOutOfRange { index: usize, dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Softplus,
    /// `z²`; lets hand-built nets represent low-degree polynomials exactly.
    Square,
}

impl Activation {
    #[inline]
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Softplus => z.max(0.0) + libm::log1p(libm::exp(-z.abs())),
            Activation::Square => z * z,
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => sigmoid(z),
            Activation::Square => 2.0 * z,
        }
    }

    #[inline]
    pub fn second_derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => 0.0,
            Activation::Softplus => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Square => 2.0,
        }
    }

    pub fn is_smooth(self) -> bool {
        !matches!(self, Activation::Relu)
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Hidden widths, first to last.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// L1 strength on first-layer weights.
    pub l1: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Adds `w·x + b` in parallel to the network.
    pub linear_branch: bool,
    pub seed: u64,
}

impl NetConfig {
    /// ReLU MLP 256-128-64 with λ₁ = 1e−4, as used for weight-based detection.
    pub fn nid() -> Self {
        Self {
            hidden: vec![256, 128, 64],
            activation: Activation::Relu,
            l1: 1e-4,
            learning_rate: 1e-2,
            batch_size: 100,
            max_epochs: 200,
            patience: 10,
            linear_branch: false,
            seed: 0,
        }
    }

    /// Softplus MLP 256-128-64 plus a parallel linear branch, no L1.
    pub fn gradient_nid() -> Self {
        Self { activation: Activation::Softplus, l1: 0.0, linear_branch: true, ..Self::nid() }
    }

    pub fn with_hidden(mut self, hidden: &[usize]) -> Self {
        self.hidden = hidden.to_vec();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(TrainError::InvalidConfig("hidden widths must be nonempty and at least 1"));
        }
        if !self.l1.is_finite() || self.l1 < 0.0 {
            return Err(TrainError::InvalidConfig("l1 strength must be finite and nonnegative"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(TrainError::InvalidConfig("learning rate must be positive"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(TrainError::InvalidConfig("batch size, epochs and patience must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBranch {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Trained surrogate `g(x) = offset + scale · (mlp(x) + w·x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateNet {
    pub config: NetConfig,
    pub mlp: Mlp,
    pub linear: Option<LinearBranch>,
    pub target: TargetScale,
    pub log: TrainingLog,
}

impl SurrogateNet {
    /// Assembles a net from explicit layers (hidden layers then a one-unit output).
    pub fn from_parts(
        activation: Activation,
        layers: Vec<Layer>,
        linear: Option<LinearBranch>,
    ) -> Result<Self, TrainError> {
        if layers.len() < 2 {
            return Err(TrainError::InvalidConfig("need at least one hidden layer and an output layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if !l.is_well_formed() {
                return Err(TrainError::InvalidConfig("layer shape does not match its parameter arrays"));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return Err(TrainError::InvalidConfig("consecutive layer sizes do not chain"));
            }
        }
        if layers[layers.len() - 1].outputs != 1 {
            return Err(TrainError::InvalidConfig("output layer must have one unit"));
        }
        if let Some(lb) = &linear {
            if lb.weights.len() != layers[0].inputs {
                return Err(TrainError::InvalidConfig("linear branch width must match the input width"));
            }
        }
        let hidden = layers[..layers.len() - 1].iter().map(|l| l.outputs).collect();
        let config = NetConfig { hidden, activation, linear_branch: linear.is_some(), ..NetConfig::nid() };
        Ok(Self {
            config,
            mlp: Mlp { activation, layers },
            linear,
            target: TargetScale::default(),
            log: TrainingLog::default(),
        })
    }

    /// Number of input features `d`.
    pub fn inputs(&self) -> usize {
        self.mlp.inputs()
    }

    pub fn activation(&self) -> Activation {
        self.mlp.activation
    }

    /// Batch evaluation, one output per input row.
    pub fn forward(&self, inputs: &Matrix) -> Result<Vec<f64>, TrainError> {
        if inputs.cols() != self.inputs() {
            return Err(TrainError::Arity { expected: self.inputs(), got: inputs.cols() });
        }
        let view = crate::perturb::SplitView {
            inputs: inputs.as_slice(),
            cols: inputs.cols(),
            labels: &[],
            weights: None,
        };
        let mut cache = MlpCache::default();
        let mut out = Vec::with_capacity(inputs.rows());
        const CHUNK: usize = 1000;
        let mut start = 0;
        while start < inputs.rows() {
            let end = (start + CHUNK).min(inputs.rows());
            let x = &view.inputs[start * view.cols..end * view.cols];
            out.extend(
                Regressor::forward(self, x, end - start, &mut cache)
                    .into_iter()
                    .map(|v| self.target.offset + self.target.scale * v),
            );
            start = end;
        }
        Ok(out)
    }

    /// Single-row evaluation.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let lin = self.linear.as_ref().map_or(0.0, |l| l.bias + l.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        self.target.offset + self.target.scale * (self.mlp.eval(x) + lin)
    }

    /// ∂g/∂x at one input.
    pub fn input_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.gradients(x).1
    }

    /// Output, ∂g/∂x and ∂g/∂θ (flat, in [`Self::flat_params`] order) at one input.
    pub fn gradients(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let scale = self.target.scale;
        let mut cache = MlpCache::default();
        let out = self.target.offset + scale * Regressor::forward(self, x, 1, &mut cache)[0];
        let mut grads: Vec<Vec<f64>> = self.block_sizes().iter().map(|&s| vec![0.0; s]).collect();
        let n = 2 * self.mlp.layers.len();
        let mut dx = vec![0.0; self.inputs()];
        self.mlp.backward(x, 1, &mut cache, &[scale], &mut grads[..n], Some(&mut dx));
        if let Some(lb) = &self.linear {
            for (g, w) in dx.iter_mut().zip(&lb.weights) {
                *g += scale * w;
            }
            grads[n] = x.iter().map(|v| scale * v).collect();
            grads[n + 1] = vec![scale];
        }
        (out, dx, grads.concat())
    }

    /// All trainable parameters, layer by layer (weights then bias), then the
    /// linear branch (weights then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.mlp.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        if let Some(lb) = &self.linear {
            out.extend_from_slice(&lb.weights);
            out.push(lb.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for b in self.blocks_mut() {
            for v in b.iter_mut() {
                *v = it.next().expect("flat parameter vector too short");
            }
        }
    }

    /// Exact input Hessian `∂²g/∂x∂xᵀ` (row-major `d×d`). Needs a smooth activation.
    pub fn hessian(&self, x: &[f64]) -> Result<Vec<f64>, TrainError> {
        if !self.activation().is_smooth() {
            return Err(TrainError::NonSmooth(self.activation()));
        }
        if x.len() != self.inputs() {
            return Err(TrainError::Arity { expected: self.inputs(), got: x.len() });
        }
        let mut h = jet::hessian(&self.mlp, x);
        h.iter_mut().for_each(|v| *v *= self.target.scale);
        Ok(h)
    }

    /// Σ|W⁽¹⁾|.
    pub fn first_layer_l1(&self) -> f64 {
        self.mlp.first_layer().weights.iter().map(|w| w.abs()).sum()
    }
}

impl Regressor for SurrogateNet {
    type Cache = MlpCache;

    fn inputs(&self) -> usize {
        self.mlp.inputs()
    }

    fn block_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.mlp.block_sizes(&mut out);
        if let Some(lb) = &self.linear {
            out.push(lb.weights.len());
            out.push(1);
        }
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        self.mlp.blocks_mut(&mut out);
        if let Some(lb) = &mut self.linear {
            out.push(&mut lb.weights);
            out.push(core::slice::from_mut(&mut lb.bias));
        }
        out
    }

    fn l1_blocks(&self) -> &[usize] {
        &[0]
    }

    fn forward(&self, x: &[f64], rows: usize, cache: &mut MlpCache) -> Vec<f64> {
        let mut out = self.mlp.forward(x, rows, cache).to_vec();
        if let Some(lb) = &self.linear {
            let d = lb.weights.len();
            for (r, o) in out.iter_mut().enumerate() {
                *o += lb.bias + x[r * d..(r + 1) * d].iter().zip(&lb.weights).map(|(a, w)| a * w).sum::<f64>();
            }
        }
        out
    }

    fn backward(&self, x: &[f64], rows: usize, cache: &mut MlpCache, dout: &[f64], grads: &mut [Vec<f64>]) {
        let n = 2 * self.mlp.layers.len();
        self.mlp.backward(x, rows, cache, dout, &mut grads[..n], None);
        if let Some(lb) = &self.linear {
            let d = lb.weights.len();
            let (gw, gb) = grads[n..].split_at_mut(1);
            gw[0].iter_mut().for_each(|v| *v = 0.0);
            gb[0][0] = 0.0;
            for r in 0..rows {
                for (g, a) in gw[0].iter_mut().zip(&x[r * d..(r + 1) * d]) {
                    *g += dout[r] * a;
                }
                gb[0][0] += dout[r];
            }
        }
    }
}

/// Trains a surrogate on the train split with early stopping on validation.
pub fn train(config: &NetConfig, data: &PerturbationDataset) -> Result<SurrogateNet, TrainError> {
    config.validate()?;
    let train = data.train();
    let val = data.val();
    if train.rows() == 0 || val.rows() == 0 {
        return Err(TrainError::EmptySplit);
    }
    let d = data.dim();
    let mut rng = rng::from_seed(rng::derive_seed(config.seed, 0x7E));
    let mlp = Mlp::new(d, &config.hidden, config.activation, &mut rng);
    let linear = config.linear_branch.then(|| LinearBranch { weights: vec![0.0; d], bias: 0.0 });
    let target = TargetScale::fit(train.labels, train.weights);
    let mut net = SurrogateNet { config: config.clone(), mlp, linear, target, log: TrainingLog::default() };
    let settings = FitSettings {
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        max_epochs: config.max_epochs,
        patience: config.patience,
        l1: config.l1,
    };
    let log = optim::fit(&mut net, &settings, &train, &val, target, &mut rng)?;
    net.log = log;
    Ok(net)
}

#[cfg(test)]
mod tests;
