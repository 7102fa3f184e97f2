use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use super::{gradient_nid, nid_rank, select_k, DetectError, Detector, Interaction, InteractionRanking, DEFAULT_REL_TOL};
use crate::neuralnet::{self, NetConfig};
use crate::perturb::{self, InputMap, Mode, OffState, OffStatePolicy, PerturbationDataset, SplitSizes};
use crate::rng::derive_seed;
use crate::{BlackBox, DataInstance, FeatureSchema, SurrogateNet};

/// How the instance is perturbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PerturbationMode {
    /// On/off masks mapped through an off-state policy.
    Binary { policy: OffStatePolicy },
    /// Truncated normal around the instance (dense schemas only).
    Continuous { sigma: f64, bounds: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MadexConfig {
    pub detector: Detector,
    /// Interaction order for GradientNID (2 or 3); NID ranks all orders.
    pub order: usize,
    pub perturbation: PerturbationMode,
    pub splits: SplitSizes,
    /// Surrogate settings; `None` picks the detector's default network.
    pub net: Option<NetConfig>,
    /// Kernel width for LIME-compatible sample weighting (binary mode only).
    pub kernel_width: Option<f64>,
    pub rel_tol: f64,
    pub seed: u64,
}

impl MadexConfig {
    pub fn new(detector: Detector, perturbation: PerturbationMode) -> Self {
        Self {
            detector,
            order: 2,
            perturbation,
            splits: SplitSizes::default(),
            net: None,
            kernel_width: None,
            rel_tol: DEFAULT_REL_TOL,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Surrogate configuration actually used, seeded from the run seed.
    pub fn resolved_net(&self) -> NetConfig {
        let base = self.net.clone().unwrap_or_else(|| match self.detector {
            Detector::Nid => NetConfig::nid(),
            Detector::GradNid => NetConfig::gradient_nid(),
        });
        base.with_seed(derive_seed(self.seed, 0x4E))
    }

    /// FNV-1a fingerprint of every setting except the seed.
    pub fn config_hash(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write(self.detector.as_str().as_bytes());
        h.write_usize(self.order);
        match &self.perturbation {
            PerturbationMode::Binary { policy } => {
                h.write_u8(0);
                for rule in &policy.rules {
                    match rule {
                        None => h.write_u8(0),
                        Some(OffState::ZeroEmbedding) => h.write_u8(1),
                        Some(OffState::BatchMean { mean }) => {
                            h.write_u8(2);
                            h.write_u64(mean.to_bits());
                        }
                        Some(OffState::Fixed { value }) => {
                            h.write_u8(3);
                            h.write_u64(value.to_bits());
                        }
                        Some(OffState::ResampleOther) => h.write_u8(4),
                    }
                }
                h.write_usize(policy.reference_rows);
            }
            PerturbationMode::Continuous { sigma, bounds } => {
                h.write_u8(1);
                h.write_u64(sigma.to_bits());
                for (lo, hi) in bounds {
                    h.write_u64(lo.to_bits());
                    h.write_u64(hi.to_bits());
                }
            }
        }
        h.write_usize(self.splits.train);
        h.write_usize(self.splits.val);
        h.write_usize(self.splits.test);
        let net = self.net.clone().unwrap_or_else(|| self.resolved_net());
        for w in &net.hidden {
            h.write_usize(*w);
        }
        h.write_u8(net.activation as u8);
        h.write_u64(net.l1.to_bits());
        h.write_u64(net.learning_rate.to_bits());
        h.write_usize(net.batch_size);
        h.write_usize(net.max_epochs);
        h.write_usize(net.patience);
        h.write_u8(u8::from(net.linear_branch));
        h.write_u64(self.kernel_width.map_or(0, f64::to_bits));
        h.write_u64(self.rel_tol.to_bits());
        h.finish()
    }
}

/// Full ranking, the selected top-`k` set and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MadexResult {
    pub detector: Detector,
    pub k: usize,
    /// The top-`k` interactions.
    pub interactions: Vec<Interaction>,
    pub ranking: InteractionRanking,
    /// Validation MSE of the product-term linear model at each tried `k`.
    pub k_path: Vec<f64>,
    pub surrogate_val_mse: f64,
    pub seed: u64,
    pub config_hash: String,
}

/// Perturbs `x`, labels the perturbations with `model`, trains a surrogate,
/// ranks interactions and keeps the top `k` chosen by [`select_k`].
pub fn madex<B: BlackBox + ?Sized>(
    model: &mut B,
    x: &DataInstance,
    schema: &FeatureSchema,
    cfg: &MadexConfig,
) -> Result<MadexResult, DetectError> {
    madex_with_artifacts(model, x, schema, cfg).map(|a| a.result)
}

/// A [`madex`] run together with the labeled dataset and trained surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct MadexArtifacts {
    pub result: MadexResult,
    pub dataset: PerturbationDataset,
    pub net: SurrogateNet,
}

pub fn madex_with_artifacts<B: BlackBox + ?Sized>(
    model: &mut B,
    x: &DataInstance,
    schema: &FeatureSchema,
    cfg: &MadexConfig,
) -> Result<MadexArtifacts, DetectError> {
    x.validate(schema)?;
    let d = schema.len();
    let data_seed = derive_seed(cfg.seed, 0xDA);
    let (dataset, probe) = match &cfg.perturbation {
        PerturbationMode::Binary { policy } => {
            if policy.rules.len() != d {
                return Err(DetectError::Perturb(perturb::PerturbError::MissingRule { field: policy.rules.len().min(d) }));
            }
            let masks = perturb::make_binary_perturbations(d, cfg.splits, data_seed)?;
            let mut ds = perturb::label_with_blackbox(model, masks, InputMap::Binary { x, schema, policy }, cfg.splits, data_seed)?;
            if let Some(width) = cfg.kernel_width {
                ds = ds.with_kernel_weights(width)?;
            }
            (ds, vec![1.0; d])
        }
        PerturbationMode::Continuous { sigma, bounds } => {
            if schema.fields().iter().any(|f| f.is_sparse()) {
                return Err(DetectError::ContinuousNeedsDense);
            }
            let inputs = perturb::make_continuous_perturbations(x, *sigma, bounds, cfg.splits, data_seed)?;
            let ds = perturb::label_with_blackbox(model, inputs, InputMap::Identity, cfg.splits, data_seed)?;
            (ds, x.values.clone())
        }
    };
    debug_assert!(dataset.mode == Mode::Binary || matches!(cfg.perturbation, PerturbationMode::Continuous { .. }));

    let net_cfg = cfg.resolved_net();
    let net = neuralnet::train(&net_cfg, &dataset)?;
    let ranking = match cfg.detector {
        Detector::Nid => nid_rank(&net)?,
        Detector::GradNid => gradient_nid(&net, &probe, cfg.order)?,
    };
    let selection = select_k(&ranking, &dataset, cfg.rel_tol)?;
    let result = MadexResult {
        detector: cfg.detector,
        k: selection.k,
        interactions: ranking.top(selection.k).to_vec(),
        ranking,
        k_path: selection.val_mse,
        surrogate_val_mse: net.log.best_epoch().map_or(f64::NAN, |e| e.val_mse),
        seed: cfg.seed,
        config_hash: alloc::format!("{:016x}", cfg.config_hash()),
    };
    Ok(MadexArtifacts { result, dataset, net })
}
