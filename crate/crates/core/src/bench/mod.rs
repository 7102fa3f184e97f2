//! Synthetic-function benchmark: black boxes trained on functions with known
//! interactions, detection trials scored by R-precision, and a fidelity
//! check of detected interactions.

mod fidelity;
mod synth;
mod trials;

use alloc::vec::Vec;

use thiserror::Error;

pub use fidelity::{fidelity_eval, fidelity_on_dataset, FidelityConfig, FidelityReport, FidelityRow};
pub use synth::{SynthFunction, SYNTH_DIM};
pub use trials::{
    instance_points, make_trained_blackbox, run_detection_trials, score_instance, trial_blackbox, BlackBoxConfig,
    TrainedBlackBox, TrialConfig, TrialReport, TrialScore, BLACKBOX_MSE_GATE,
};

use crate::detect::{DetectError, Interaction};
use crate::neuralnet::TrainError;
use crate::perturb::PerturbError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("synthetic functions take {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("unknown synthetic function (expected F1..F4)")]
    UnknownFunction,
    #[error("ground truth must be nonempty")]
    EmptyTruth,
    #[error("{detector} at order {order} cannot recover an order-{truth} interaction")]
    OrderUnsupported { detector: &'static str, order: usize, truth: usize },
    #[error("black box test MSE {mse:.4} exceeds the gate {gate}")]
    BlackBoxGate { mse: f64, gate: f64 },
    #[error("interaction {0:?} is out of range")]
    InteractionOutOfRange(Vec<usize>),
    #[error("need at least one trial and one instance")]
    EmptyRun,
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
}

/// Fraction of the top-`R` ranked interactions that are in `truth`, with
/// `R = |truth|`. Rankings shorter than `R` count the missing slots as misses.
pub fn r_precision(ranking: &[Interaction], truth: &[Vec<usize>]) -> Result<f64, BenchError> {
    if truth.is_empty() {
        return Err(BenchError::EmptyTruth);
    }
    let r = truth.len();
    let hits = ranking
        .iter()
        .take(r)
        .filter(|i| truth.iter().any(|t| sorted(t) == i.features()))
        .count();
    Ok(hits as f64 / r as f64)
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}
