//! Global interaction detection: run the local explainer over a batch and
//! count how often each interaction is selected.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::detect::{madex, MadexConfig};
use crate::rng::derive_seed;
use crate::{BlackBox, DataInstance, FeatureSchema};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalEntry {
    /// 0-based feature indices, sorted.
    pub features: Vec<usize>,
    pub count: usize,
}

impl GlobalEntry {
    pub fn order(&self) -> usize {
        self.features.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFailure {
    pub index: usize,
    pub message: String,
}

/// Interaction occurrence counts over a batch, most frequent first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalSummary {
    pub entries: Vec<GlobalEntry>,
    pub batch_size: usize,
    /// Instances whose explanation succeeded; every count is at most this.
    pub effective_batch_size: usize,
    pub failures: Vec<InstanceFailure>,
    pub model: String,
}

impl GlobalSummary {
    /// Counts interactions from per-instance detections, in batch order.
    /// Duplicates within one instance count once.
    pub fn from_detections<I>(model: impl Into<String>, per_instance: I) -> Self
    where
        I: IntoIterator<Item = Result<Vec<Vec<usize>>, String>>,
    {
        let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut failures = Vec::new();
        let mut batch_size = 0;
        for (index, result) in per_instance.into_iter().enumerate() {
            batch_size += 1;
            match result {
                Ok(sets) => {
                    let mut seen: Vec<Vec<usize>> = sets
                        .into_iter()
                        .map(|mut s| {
                            s.sort_unstable();
                            s
                        })
                        .collect();
                    seen.sort();
                    seen.dedup();
                    for s in seen {
                        *counts.entry(s).or_insert(0) += 1;
                    }
                }
                Err(message) => failures.push(InstanceFailure { index, message }),
            }
        }
        let mut entries: Vec<GlobalEntry> =
            counts.into_iter().map(|(features, count)| GlobalEntry { features, count }).collect();
        sort_entries(&mut entries);
        Self { entries, batch_size, effective_batch_size: batch_size - failures.len(), failures, model: model.into() }
    }

    pub fn count_of(&self, features: &[usize]) -> Option<usize> {
        self.entries.iter().find(|e| e.features == features).map(|e| e.count)
    }

    /// Number of distinct interactions per order.
    pub fn order_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for e in &self.entries {
            *h.entry(e.order()).or_insert(0) += 1;
        }
        h
    }

    /// Total occurrences per order.
    pub fn occurrence_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for e in &self.entries {
            *h.entry(e.order()).or_insert(0) += e.count;
        }
        h
    }
}

fn sort_entries(entries: &mut [GlobalEntry]) {
    entries.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.features.cmp(&b.features)));
}

/// Configuration for instance `index` of a batch: same settings, derived seed.
pub fn instance_config(cfg: &MadexConfig, index: usize) -> MadexConfig {
    cfg.clone().with_seed(derive_seed(cfg.seed, index as u64))
}

/// Sequential global detection. Failed instances are recorded and skipped.
pub fn detect_global<B: BlackBox + ?Sized>(
    model: &mut B,
    batch: &[DataInstance],
    schema: &FeatureSchema,
    cfg: &MadexConfig,
) -> GlobalSummary {
    let name = model.name().to_string();
    let results: Vec<Result<Vec<Vec<usize>>, String>> = batch
        .iter()
        .enumerate()
        .map(|(i, x)| {
            madex(model, x, schema, &instance_config(cfg, i))
                .map(|r| r.interactions.iter().map(|it| it.features().to_vec()).collect())
                .map_err(|e| e.to_string())
        })
        .collect();
    GlobalSummary::from_detections(name, results)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneRule {
    /// Drop an interaction contained in another listed interaction.
    #[default]
    DropSubsets,
    /// Drop an interaction containing another listed interaction.
    DropSupersets,
}

fn proper_subset(a: &[usize], b: &[usize]) -> bool {
    a.len() < b.len() && a.iter().all(|x| b.binary_search(x).is_ok())
}

/// Scans entries in rank order, dropping those dominated under `rule` by any
/// other entry still in the list, until `k` entries are kept.
pub fn prune_subsets(summary: &GlobalSummary, k: usize, rule: PruneRule) -> GlobalSummary {
    let entries = &summary.entries;
    let mut dropped = alloc::vec![false; entries.len()];
    let mut kept = Vec::new();
    for i in 0..entries.len() {
        if kept.len() >= k {
            break;
        }
        let a = &entries[i].features;
        let dominated = entries.iter().enumerate().any(|(j, e)| {
            j != i
                && !dropped[j]
                && match rule {
                    PruneRule::DropSubsets => proper_subset(a, &e.features),
                    PruneRule::DropSupersets => proper_subset(&e.features, a),
                }
        });
        if dominated {
            dropped[i] = true;
        } else {
            kept.push(entries[i].clone());
        }
    }
    GlobalSummary { entries: kept, ..summary.clone() }
}
