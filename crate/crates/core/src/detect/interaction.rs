use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::DetectError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    /// Weight-based neural interaction detection.
    Nid,
    /// Squared mixed partial derivatives of a smooth surrogate.
    #[serde(rename = "gradnid")]
    GradNid,
}

impl Detector {
    /// GradientNID for single-instance pairwise runs, NID for higher orders or
    /// batch detection.
    pub fn default_for(batch: bool, order: usize) -> Self {
        if batch || order > 2 {
            Detector::Nid
        } else {
            Detector::GradNid
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Detector::Nid => "nid",
            Detector::GradNid => "gradnid",
        }
    }
}

impl core::str::FromStr for Detector {
    type Err = DetectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nid" => Ok(Detector::Nid),
            "gradnid" | "gradient_nid" | "gradientnid" => Ok(Detector::GradNid),
            _ => Err(DetectError::UnknownDetector),
        }
    }
}

/// A set of at least two distinct feature indices (0-based, sorted) with a
/// nonnegative detection strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    features: Vec<usize>,
    pub strength: f64,
    pub detector: Detector,
}

impl Interaction {
    pub fn new(mut features: Vec<usize>, strength: f64, detector: Detector) -> Result<Self, DetectError> {
        features.sort_unstable();
        features.dedup();
        if features.len() < 2 {
            return Err(DetectError::InvalidInteraction("an interaction needs at least two distinct features"));
        }
        if !(strength >= 0.0) {
            return Err(DetectError::InvalidInteraction("strength must be nonnegative"));
        }
        Ok(Self { features, strength, detector })
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn order(&self) -> usize {
        self.features.len()
    }

    pub fn is_within(&self, dim: usize) -> bool {
        self.features.iter().all(|&i| i < dim)
    }
}

/// Descending strength, ties broken lexicographically on the index sets.
pub(crate) fn rank_order(a: &Interaction, b: &Interaction) -> Ordering {
    b.strength.total_cmp(&a.strength).then_with(|| a.features.cmp(&b.features))
}

/// Interactions sorted by descending strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRanking {
    pub detector: Detector,
    pub interactions: Vec<Interaction>,
    /// Number of candidate strength evaluations performed.
    pub candidate_tests: usize,
}

impl InteractionRanking {
    pub fn new(detector: Detector, mut interactions: Vec<Interaction>, candidate_tests: usize) -> Self {
        interactions.sort_by(rank_order);
        Self { detector, interactions, candidate_tests }
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn top(&self, k: usize) -> &[Interaction] {
        &self.interactions[..k.min(self.interactions.len())]
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Interaction> {
        self.interactions.iter()
    }
}
