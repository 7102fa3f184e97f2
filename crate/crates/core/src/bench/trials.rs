use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{r_precision, BenchError, SynthFunction, SYNTH_DIM};
use crate::detect::{madex, Detector, MadexConfig, PerturbationMode};
use crate::neuralnet::{self, Activation, NetConfig, SurrogateNet};
use crate::perturb::{Mode, PerturbationDataset, SplitSizes};
use crate::rng::{self, derive_seed};
use crate::{BlackBox, DataInstance, FeatureSchema, Matrix, QueryError};

/// A trained black box is rejected when its held-out MSE exceeds this.
pub const BLACKBOX_MSE_GATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackBoxConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Samples drawn uniformly from `[−1, 1]^10`; 80/10/10 train/val/test.
    pub samples: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
}

impl Default for BlackBoxConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64, 32],
            activation: Activation::Relu,
            samples: 10_000,
            max_epochs: 200,
            patience: 10,
            learning_rate: 1e-2,
        }
    }
}

/// An MLP fitted to a synthetic function, queried as a black box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedBlackBox {
    pub function: SynthFunction,
    pub net: SurrogateNet,
    pub test_mse: f64,
    name: alloc::string::String,
}

impl BlackBox for TrainedBlackBox {
    fn arity(&self) -> usize {
        SYNTH_DIM
    }
    fn name(&self) -> &str {
        &self.name
    }
    fn predict_raw(&mut self, inputs: &Matrix) -> Result<Vec<f64>, QueryError> {
        self.net.forward(inputs).map_err(|_| QueryError::Arity { expected: SYNTH_DIM, got: inputs.cols() })
    }
}

/// Trains an MLP on `f` over uniform samples and checks its test MSE
/// against [`BLACKBOX_MSE_GATE`].
pub fn make_trained_blackbox(f: SynthFunction, cfg: &BlackBoxConfig, seed: u64) -> Result<TrainedBlackBox, BenchError> {
    let n = cfg.samples.max(10);
    let splits = SplitSizes { train: n - 2 * (n / 10), val: n / 10, test: n / 10 };
    let mut rng = rng::from_seed(derive_seed(seed, 0xB0));
    let mut inputs = Matrix::zeros(n, SYNTH_DIM);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let row = inputs.row_mut(r);
        for v in row.iter_mut() {
            *v = rng.random_range(-1.0..=1.0);
        }
        labels.push(f.eval_unchecked(row));
    }
    let data = PerturbationDataset::new(Mode::Continuous, inputs, labels, None, splits, seed)?;
    let net_cfg = NetConfig {
        hidden: cfg.hidden.clone(),
        activation: cfg.activation,
        l1: 0.0,
        learning_rate: cfg.learning_rate,
        batch_size: 100,
        max_epochs: cfg.max_epochs,
        patience: cfg.patience,
        linear_branch: false,
        seed: derive_seed(seed, 0xB1),
    };
    let net = neuralnet::train(&net_cfg, &data)?;
    let test = data.test();
    let mut m = Matrix::zeros(0, SYNTH_DIM);
    for i in 0..test.rows() {
        m.push_row(test.row(i));
    }
    let pred = net.forward(&m)?;
    let test_mse = pred.iter().zip(test.labels).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / test.rows() as f64;
    if !(test_mse <= BLACKBOX_MSE_GATE) {
        return Err(BenchError::BlackBoxGate { mse: test_mse, gate: BLACKBOX_MSE_GATE });
    }
    Ok(TrainedBlackBox { function: f, net, test_mse, name: alloc::format!("mlp-{}", f.name()) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub function: SynthFunction,
    pub detector: Detector,
    /// GradientNID order.
    pub order: usize,
    pub trials: usize,
    pub instances: usize,
    pub sigma: f64,
    pub blackbox: BlackBoxConfig,
    /// Surrogate override; `None` uses the detector default.
    pub net: Option<NetConfig>,
    pub splits: SplitSizes,
    pub seed: u64,
}

impl TrialConfig {
    pub fn new(function: SynthFunction, detector: Detector) -> Self {
        Self {
            function,
            detector,
            order: 2,
            trials: 10,
            instances: 20,
            sigma: 0.6,
            blackbox: BlackBoxConfig::default(),
            net: None,
            splits: SplitSizes::default(),
            seed: 0,
        }
    }

    /// Refuses combinations the detector cannot score, e.g. pairwise
    /// GradientNID against a 3-way ground truth.
    pub fn check(&self) -> Result<(), BenchError> {
        if self.trials == 0 || self.instances == 0 {
            return Err(BenchError::EmptyRun);
        }
        let truth = self.function.ground_truth().iter().map(Vec::len).max().unwrap_or(0);
        if self.detector == Detector::GradNid && self.order != truth {
            return Err(BenchError::OrderUnsupported { detector: self.detector.as_str(), order: self.order, truth });
        }
        Ok(())
    }

    fn madex_config(&self, trial: usize, instance: usize) -> MadexConfig {
        let mut cfg = MadexConfig::new(
            self.detector,
            PerturbationMode::Continuous { sigma: self.sigma, bounds: vec![(-1.0, 1.0); SYNTH_DIM] },
        );
        cfg.order = self.order;
        cfg.net = self.net.clone();
        cfg.splits = self.splits;
        cfg.seed = derive_seed(derive_seed(self.seed, 0x7100 + trial as u64), instance as u64);
        cfg
    }
}

/// Black box for one trial (a fresh fit per trial).
pub fn trial_blackbox(cfg: &TrialConfig, trial: usize) -> Result<TrainedBlackBox, BenchError> {
    make_trained_blackbox(cfg.function, &cfg.blackbox, derive_seed(cfg.seed, 0xBB00 + trial as u64))
}

/// Instance locations for one trial, uniform in `[−1, 1]^10`.
pub fn instance_points(cfg: &TrialConfig, trial: usize) -> Vec<DataInstance> {
    let mut rng = rng::from_seed(derive_seed(cfg.seed, 0x1500 + trial as u64));
    (0..cfg.instances)
        .map(|_| DataInstance::new((0..SYNTH_DIM).map(|_| rng.random_range(-1.0..=1.0)).collect()))
        .collect()
}

/// R-precision of one explanation.
pub fn score_instance<B: BlackBox + ?Sized>(
    model: &mut B,
    cfg: &TrialConfig,
    trial: usize,
    instance: usize,
    x: &DataInstance,
) -> Result<f64, BenchError> {
    let schema = FeatureSchema::dense(SYNTH_DIM).expect("nonzero width");
    let result = madex(model, x, &schema, &cfg.madex_config(trial, instance))?;
    let order = match cfg.detector {
        Detector::Nid => None,
        Detector::GradNid => Some(cfg.order),
    };
    let truth = cfg.function.ground_truth();
    // NID ranks every order at once; score only candidates of the truth's order.
    let truth_order = truth[0].len();
    let ranked: Vec<_> = result
        .ranking
        .iter()
        .filter(|i| order.is_some() || i.order() == truth_order)
        .cloned()
        .collect();
    r_precision(&ranked, &truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialScore {
    pub trial: usize,
    pub blackbox_test_mse: f64,
    /// Per-instance R-precision.
    pub scores: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub function: SynthFunction,
    pub detector: Detector,
    pub trials: Vec<TrialScore>,
    /// Mean over trials of the per-trial mean R-precision.
    pub mean: f64,
    /// Sample standard deviation over trials (0 for a single trial).
    pub std: f64,
}

impl TrialReport {
    pub fn from_trials(function: SynthFunction, detector: Detector, trials: Vec<TrialScore>) -> Self {
        let n = trials.len() as f64;
        let mean = trials.iter().map(|t| t.mean).sum::<f64>() / n;
        let std = if trials.len() > 1 {
            libm::sqrt(trials.iter().map(|t| (t.mean - mean) * (t.mean - mean)).sum::<f64>() / (n - 1.0))
        } else {
            0.0
        };
        Self { function, detector, trials, mean, std }
    }
}

/// Runs every trial sequentially. The `glider` crate has a parallel runner
/// built from the same pieces.
pub fn run_detection_trials(cfg: &TrialConfig) -> Result<TrialReport, BenchError> {
    cfg.check()?;
    let mut out = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let mut bb = trial_blackbox(cfg, trial)?;
        let scores = instance_points(cfg, trial)
            .iter()
            .enumerate()
            .map(|(i, x)| score_instance(&mut bb, cfg, trial, i, x))
            .collect::<Result<Vec<_>, _>>()?;
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        out.push(TrialScore { trial, blackbox_test_mse: bb.test_mse, scores, mean });
    }
    Ok(TrialReport::from_trials(cfg.function, cfg.detector, out))
}
