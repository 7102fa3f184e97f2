//! Interaction detection from trained surrogates.
//!
//! * [`nid_rank`]: arbitrary-order interactions from first-layer weights.
//! * [`gradient_nid`]: squared mixed partials of a smooth surrogate.
//! * [`select_k`]: how many ranked interactions actually help a linear model.
//! * [`madex`]: the end-to-end local explainer.

mod gradnid;
mod interaction;
mod madex;
mod nid;
mod select;

use thiserror::Error;

pub use gradnid::{gradient_nid, mixed_partials, THIRD_ORDER_STEP};
pub use interaction::{Detector, Interaction, InteractionRanking};
pub use madex::{madex, madex_with_artifacts, MadexArtifacts, MadexConfig, MadexResult, PerturbationMode};
pub use nid::{nid_rank, nid_rank_with, MinWeight, NidStrength};
pub use select::{select_k, KSelection, DEFAULT_REL_TOL};

use crate::neuralnet::TrainError;
use crate::perturb::PerturbError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("invalid interaction: {0}")]
    InvalidInteraction(&'static str),
    #[error("unknown detector (expected nid or gradnid)")]
    UnknownDetector,
    #[error("network has no learned first-layer weights")]
    UntrainedNet,
    #[error("interaction order {0} is not supported; only 2 and 3 (low-order only)")]
    OrderTooHigh(usize),
    #[error("interaction order must be at least 2, got {0}")]
    InvalidOrder(usize),
    #[error("probe has {got} values, network expects {expected}")]
    ProbeArity { expected: usize, got: usize },
    #[error("continuous perturbation needs an all-dense schema")]
    ContinuousNeedsDense,
    #[error("perturbation failed: {0}")]
    Perturb(#[from] PerturbError),
    #[error("surrogate training failed: {0}")]
    Train(#[from] TrainError),
}
