//! Prediction-performance check of detected interactions: a linear model on
//! the binary perturbations plus one small network per interaction, grown
//! while validation error keeps dropping.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::detect::{Interaction, DEFAULT_REL_TOL};
use crate::neuralnet::optim::{self, FitSettings, Regressor, TargetScale};
use crate::neuralnet::{train_glm_with_products, Activation, LinearBranch, Mlp, MlpCache};
use crate::perturb::{self, InputMap, OffStatePolicy, PerturbationDataset, SplitSizes, SplitView};
use crate::rng::{self, derive_seed};
use crate::{BlackBox, DataInstance, FeatureSchema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityConfig {
    pub policy: OffStatePolicy,
    pub splits: SplitSizes,
    /// Kernel width for sample weighting; `None` disables weighting.
    pub kernel_width: Option<f64>,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl FidelityConfig {
    pub fn new(policy: OffStatePolicy) -> Self {
        Self {
            policy,
            splits: SplitSizes::default(),
            kernel_width: Some(perturb::DEFAULT_KERNEL_WIDTH),
            hidden: vec![64, 32, 16],
            activation: Activation::Relu,
            learning_rate: 1e-2,
            batch_size: 100,
            max_epochs: 200,
            patience: 10,
            rel_tol: DEFAULT_REL_TOL,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub k: usize,
    pub val_mse: f64,
    pub test_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Rows for `k = 0..=L`.
    pub rows: Vec<FidelityRow>,
    /// Last `k` that improved validation error.
    pub l: usize,
    /// The first rejected step, if any.
    pub rejected: Option<FidelityRow>,
}

impl FidelityReport {
    pub fn at(&self, k: usize) -> Option<&FidelityRow> {
        self.rows.get(k)
    }
}

/// Linear model over all inputs plus one MLP per interaction fed only that
/// interaction's coordinates.
#[derive(Debug, Clone)]
pub(crate) struct InteractionEnsemble {
    linear: LinearBranch,
    towers: Vec<(Vec<usize>, Mlp)>,
}

#[derive(Debug, Default)]
pub(crate) struct EnsembleCache {
    inputs: Vec<Vec<f64>>,
    caches: Vec<MlpCache>,
}

impl Regressor for InteractionEnsemble {
    type Cache = EnsembleCache;

    fn inputs(&self) -> usize {
        self.linear.weights.len()
    }

    fn block_sizes(&self) -> Vec<usize> {
        let mut out = vec![self.linear.weights.len(), 1];
        for (_, t) in &self.towers {
            t.block_sizes(&mut out);
        }
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.linear.weights, core::slice::from_mut(&mut self.linear.bias)];
        for (_, t) in &mut self.towers {
            t.blocks_mut(&mut out);
        }
        out
    }

    fn l1_blocks(&self) -> &[usize] {
        &[]
    }

    fn forward(&self, x: &[f64], rows: usize, cache: &mut EnsembleCache) -> Vec<f64> {
        let d = self.linear.weights.len();
        let mut out: Vec<f64> = (0..rows)
            .map(|r| self.linear.bias + x[r * d..(r + 1) * d].iter().zip(&self.linear.weights).map(|(a, w)| a * w).sum::<f64>())
            .collect();
        cache.inputs.resize_with(self.towers.len(), Vec::new);
        cache.caches.resize_with(self.towers.len(), Default::default);
        for (t, (cols, mlp)) in self.towers.iter().enumerate() {
            let buf = &mut cache.inputs[t];
            buf.clear();
            for r in 0..rows {
                buf.extend(cols.iter().map(|&c| x[r * d + c]));
            }
            let y = mlp.forward(buf, rows, &mut cache.caches[t]);
            for (o, v) in out.iter_mut().zip(y) {
                *o += v;
            }
        }
        out
    }

    fn backward(&self, x: &[f64], rows: usize, cache: &mut EnsembleCache, dout: &[f64], grads: &mut [Vec<f64>]) {
        let d = self.linear.weights.len();
        grads[0].iter_mut().for_each(|v| *v = 0.0);
        grads[1][0] = 0.0;
        for r in 0..rows {
            for (g, a) in grads[0].iter_mut().zip(&x[r * d..(r + 1) * d]) {
                *g += dout[r] * a;
            }
            grads[1][0] += dout[r];
        }
        let mut offset = 2;
        for (t, (_, mlp)) in self.towers.iter().enumerate() {
            let n = 2 * mlp.layers.len();
            mlp.backward(&cache.inputs[t], rows, &mut cache.caches[t], dout, &mut grads[offset..offset + n], None);
            offset += n;
        }
    }
}

fn val_improved(prev: f64, next: f64, rel_tol: f64, floor: f64) -> bool {
    next < prev * (1.0 - rel_tol) && prev - next > floor
}

fn mse(model: &InteractionEnsemble, view: &SplitView<'_>, target: TargetScale) -> f64 {
    optim::weighted_mse(&optim::predict_split(model, view, target), view.labels, view.weights)
}

/// Evaluates how much each of the top interactions improves a first-order
/// fit of the black box around `x`.
pub fn fidelity_eval<B: BlackBox + ?Sized>(
    model: &mut B,
    x: &DataInstance,
    schema: &FeatureSchema,
    interactions: &[Interaction],
    cfg: &FidelityConfig,
) -> Result<FidelityReport, BenchError> {
    let d = schema.len();
    if let Some(bad) = interactions.iter().find(|i| !i.is_within(d)) {
        return Err(BenchError::InteractionOutOfRange(bad.features().to_vec()));
    }
    let data_seed = derive_seed(cfg.seed, 0xF1);
    let masks = perturb::make_binary_perturbations(d, cfg.splits, data_seed)?;
    let mut data = perturb::label_with_blackbox(
        model,
        masks,
        InputMap::Binary { x, schema, policy: &cfg.policy },
        cfg.splits,
        data_seed,
    )?;
    if let Some(w) = cfg.kernel_width {
        data = data.with_kernel_weights(w)?;
    }
    fidelity_on_dataset(&data, interactions, cfg)
}

/// [`fidelity_eval`] on an existing labeled binary dataset.
pub fn fidelity_on_dataset(
    data: &PerturbationDataset,
    interactions: &[Interaction],
    cfg: &FidelityConfig,
) -> Result<FidelityReport, BenchError> {
    let d = data.dim();
    let (train, val, test) = (data.train(), data.val(), data.test());
    let target = TargetScale::fit(train.labels, train.weights);
    let floor = 1e-10 * target.scale * target.scale;

    let glm = train_glm_with_products(data, &[])?;
    let linear = LinearBranch {
        weights: glm.coefficients.iter().map(|b| b / target.scale).collect(),
        bias: (glm.intercept - target.offset) / target.scale,
    };
    let mut current = InteractionEnsemble { linear, towers: Vec::new() };
    let mut rows = vec![FidelityRow { k: 0, val_mse: glm.val_mse, test_mse: glm.test_mse }];
    let mut rejected = None;
    let settings = FitSettings {
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        max_epochs: cfg.max_epochs,
        patience: cfg.patience,
        l1: 0.0,
    };

    for (k, interaction) in interactions.iter().enumerate() {
        let mut rng = rng::from_seed(derive_seed(cfg.seed, 0x100 + k as u64));
        let cols = interaction.features().to_vec();
        let mut tower = Mlp::new(cols.len(), &cfg.hidden, cfg.activation, &mut rng);
        // Start from the previous model exactly: the new tower outputs zero.
        let last = tower.layers.len() - 1;
        tower.layers[last].weights.iter_mut().for_each(|w| *w = 0.0);
        let mut candidate = current.clone();
        candidate.towers.push((cols, tower));
        optim::fit(&mut candidate, &settings, &train, &val, target, &mut rng)?;
        let row = FidelityRow { k: k + 1, val_mse: mse(&candidate, &val, target), test_mse: mse(&candidate, &test, target) };
        let prev = rows.last().map_or(f64::INFINITY, |r| r.val_mse);
        if val_improved(prev, row.val_mse, cfg.rel_tol, floor) {
            rows.push(row);
            current = candidate;
        } else {
            rejected = Some(row);
            break;
        }
    }
    debug_assert_eq!(current.inputs(), d);
    Ok(FidelityReport { l: rows.len() - 1, rows, rejected })
}
