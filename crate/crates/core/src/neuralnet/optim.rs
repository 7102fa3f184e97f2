//! Minibatch Adam with early stopping, shared by every trainable model.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::perturb::SplitView;
use crate::rng::Rng;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Model trainable by [`fit`]. Parameters are exposed as ordered blocks and
/// the model predicts on a normalized target scale.
pub(crate) trait Regressor: Clone {
    type Cache: Default;

    fn inputs(&self) -> usize;
    fn block_sizes(&self) -> Vec<usize>;
    fn blocks_mut(&mut self) -> Vec<&mut [f64]>;
    /// Blocks that receive the L1 penalty.
    fn l1_blocks(&self) -> &[usize];
    fn forward(&self, x: &[f64], rows: usize, cache: &mut Self::Cache) -> Vec<f64>;
    /// Overwrites `grads` with ∂(Σ dout·output)/∂θ for the cached pass.
    fn backward(&self, x: &[f64], rows: usize, cache: &mut Self::Cache, dout: &[f64], grads: &mut [Vec<f64>]);
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct FitSettings {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    /// Index into `epochs` of the returned snapshot.
    pub best: usize,
}

impl TrainingLog {
    pub fn best_epoch(&self) -> Option<&EpochLog> {
        self.epochs.get(self.best)
    }
}

/// Target normalization `y = offset + scale · output`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub offset: f64,
    pub scale: f64,
}

impl Default for TargetScale {
    fn default() -> Self {
        Self { offset: 0.0, scale: 1.0 }
    }
}

impl TargetScale {
    /// Weighted mean and standard deviation of `y`; degenerate spreads map to scale 1.
    pub fn fit(y: &[f64], w: Option<&[f64]>) -> Self {
        let (mut sw, mut s1) = (0.0, 0.0);
        for (i, v) in y.iter().enumerate() {
            let wi = w.map_or(1.0, |w| w[i]);
            sw += wi;
            s1 += wi * v;
        }
        let mean = s1 / sw;
        let var = y.iter().enumerate().map(|(i, v)| w.map_or(1.0, |w| w[i]) * (v - mean) * (v - mean)).sum::<f64>() / sw;
        let sd = libm::sqrt(var);
        let scale = if sd > 1e-12 * (1.0 + mean.abs()) { sd } else { 1.0 };
        Self { offset: mean, scale }
    }
}

/// Weighted mean squared error of `pred` against `y`.
pub(crate) fn weighted_mse(pred: &[f64], y: &[f64], w: Option<&[f64]>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..y.len() {
        let wi = w.map_or(1.0, |w| w[i]);
        let e = pred[i] - y[i];
        num += wi * e * e;
        den += wi;
    }
    num / den
}

/// Evaluates `model` on a split in original target units.
pub(crate) fn predict_split<R: Regressor>(model: &R, view: &SplitView<'_>, target: TargetScale) -> Vec<f64> {
    let mut cache = R::Cache::default();
    let mut out = Vec::with_capacity(view.rows());
    const CHUNK: usize = 1000;
    let mut start = 0;
    while start < view.rows() {
        let end = (start + CHUNK).min(view.rows());
        let x = &view.inputs[start * view.cols..end * view.cols];
        out.extend(model.forward(x, end - start, &mut cache).into_iter().map(|v| target.offset + target.scale * v));
        start = end;
    }
    out
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(sizes: &[usize]) -> Self {
        Self { m: sizes.iter().map(|&s| vec![0.0; s]).collect(), v: sizes.iter().map(|&s| vec![0.0; s]).collect(), t: 0 }
    }

    fn step(&mut self, params: Vec<&mut [f64]>, grads: &[Vec<f64>], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - libm::pow(ADAM_BETA1, f64::from(self.t));
        let bc2 = 1.0 - libm::pow(ADAM_BETA2, f64::from(self.t));
        for (b, p) in params.into_iter().enumerate() {
            let (m, v, g) = (&mut self.m[b], &mut self.v[b], &grads[b]);
            for i in 0..p.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p[i] -= lr * mh / (libm::sqrt(vh) + ADAM_EPS);
            }
        }
    }
}

/// Trains `model` in place on weighted MSE (normalized targets) plus
/// `l1 · Σ|θ|` over the model's L1 blocks, keeping the snapshot with the
/// lowest validation MSE.
pub(crate) fn fit<R: Regressor>(
    model: &mut R,
    settings: &FitSettings,
    train: &SplitView<'_>,
    val: &SplitView<'_>,
    target: TargetScale,
    rng: &mut Rng,
) -> Result<TrainingLog, TrainError> {
    if train.rows() == 0 || val.rows() == 0 {
        return Err(TrainError::EmptySplit);
    }
    if train.cols != model.inputs() {
        return Err(TrainError::Arity { expected: model.inputs(), got: train.cols });
    }
    let cols = train.cols;
    let sizes = model.block_sizes();
    let l1_blocks: Vec<usize> = model.l1_blocks().to_vec();
    let mut grads: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
    let mut adam = Adam::new(&sizes);
    let mut cache = R::Cache::default();
    let norm_y: Vec<f64> = train.labels.iter().map(|y| (y - target.offset) / target.scale).collect();

    let mut order: Vec<usize> = (0..train.rows()).collect();
    let mut xb = Vec::with_capacity(settings.batch_size * cols);
    let mut dout = Vec::with_capacity(settings.batch_size);

    let mut log = TrainingLog::default();
    let mut best_val = f64::INFINITY;
    let mut best_model = model.clone();
    let mut since_best = 0;

    for epoch in 0..settings.max_epochs {
        order.shuffle(rng);
        for batch in order.chunks(settings.batch_size) {
            xb.clear();
            for &i in batch {
                xb.extend_from_slice(train.row(i));
            }
            let pred = model.forward(&xb, batch.len(), &mut cache);
            let wsum: f64 = batch.iter().map(|&i| train.weights.map_or(1.0, |w| w[i])).sum();
            dout.clear();
            for (k, &i) in batch.iter().enumerate() {
                let wi = train.weights.map_or(1.0, |w| w[i]);
                dout.push(2.0 * wi * (pred[k] - norm_y[i]) / wsum);
            }
            model.backward(&xb, batch.len(), &mut cache, &dout, &mut grads);
            if settings.l1 > 0.0 {
                let params = model.blocks_mut();
                for &b in &l1_blocks {
                    for (g, p) in grads[b].iter_mut().zip(params[b].iter()) {
                        if *p > 0.0 {
                            *g += settings.l1;
                        } else if *p < 0.0 {
                            *g -= settings.l1;
                        }
                    }
                }
            }
            adam.step(model.blocks_mut(), &grads, settings.learning_rate);
        }

        let train_mse = weighted_mse(&predict_split(model, train, target), train.labels, train.weights);
        let val_mse = weighted_mse(&predict_split(model, val, target), val.labels, val.weights);
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        log.epochs.push(EpochLog { epoch, train_mse, val_mse });
        if val_mse < best_val {
            best_val = val_mse;
            best_model = model.clone();
            log.best = log.epochs.len() - 1;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= settings.patience {
                break;
            }
        }
    }
    *model = best_model;
    Ok(log)
}
