use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_BINS: usize = 100;

/// Quantile bucket boundaries for one dense field. A value `v` falls in
/// bucket `#{b : b ≤ v}`, so out-of-range values land in the edge buckets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSpec {
    pub field: String,
    pub boundaries: Vec<f64>,
    pub max_bins: usize,
}

impl BucketSpec {
    pub fn bucket(&self, v: f64) -> u32 {
        self.boundaries.partition_point(|b| *b <= v) as u32
    }

    pub fn bins(&self) -> usize {
        self.boundaries.len() + 1
    }
}

/// Quantile boundaries with duplicates merged; at most `max_bins` buckets.
/// Non-finite values are ignored when fitting and bucketed like any other value.
pub fn bucketize_dense(field: impl Into<String>, values: &[f64], max_bins: usize) -> (BucketSpec, Vec<u32>) {
    let max_bins = max_bins.max(1);
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut boundaries: Vec<f64> = Vec::new();
    if n > 0 {
        let min = sorted[0];
        for k in 1..max_bins {
            let cut = sorted[(k * n / max_bins).min(n - 1)];
            if cut > min && boundaries.last().is_none_or(|last| cut > *last) {
                boundaries.push(cut);
            }
        }
    }
    let spec = BucketSpec { field: field.into(), boundaries, max_bins };
    let ids = values.iter().map(|v| spec.bucket(*v)).collect();
    (spec, ids)
}
