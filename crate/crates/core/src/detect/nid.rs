use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{DetectError, Detector, Interaction, InteractionRanking};
use crate::SurrogateNet;

/// Interaction strength rule for weight-based detection.
pub trait NidStrength {
    /// Strength contributed at one unit by a candidate whose members have the
    /// given absolute first-layer weights, for a unit with output influence `z`.
    fn unit_strength(&self, influence: f64, member_weights: &[f64]) -> f64;
}

/// `z_j · min_{i∈I} |W⁽¹⁾_{j,i}|`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MinWeight;

impl NidStrength for MinWeight {
    fn unit_strength(&self, influence: f64, member_weights: &[f64]) -> f64 {
        influence * member_weights.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Ranks interactions of every order from the first-layer weights.
pub fn nid_rank(net: &SurrogateNet) -> Result<InteractionRanking, DetectError> {
    nid_rank_with(net, &MinWeight)
}

/// At each first-layer unit the features are sorted by weight magnitude and
/// every top-`m` prefix (`m = 2..=d`) becomes a candidate, so exactly
/// `h·(d−1)` candidate strengths are evaluated. Strengths are summed across units.
pub fn nid_rank_with<S: NidStrength>(net: &SurrogateNet, rule: &S) -> Result<InteractionRanking, DetectError> {
    let first = net.mlp.first_layer();
    if net.flat_params().iter().any(|v| !v.is_finite()) || first.weights.iter().all(|w| *w == 0.0) {
        return Err(DetectError::UntrainedNet);
    }
    let d = first.inputs;
    let influence = net.mlp.unit_influence();
    let mut totals: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut tests = 0;
    let mut order: Vec<usize> = (0..d).collect();
    let mut mags: Vec<f64> = Vec::with_capacity(d);
    for (j, &z) in influence.iter().enumerate() {
        let row: Vec<f64> = (0..d).map(|i| first.weight(j, i).abs()).collect();
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        mags.clear();
        mags.push(row[order[0]]);
        for m in 2..=d {
            mags.push(row[order[m - 1]]);
            let strength = rule.unit_strength(z, &mags);
            tests += 1;
            if strength > 0.0 {
                let mut key = order[..m].to_vec();
                key.sort_unstable();
                *totals.entry(key).or_insert(0.0) += strength;
            }
        }
    }
    let interactions = totals
        .into_iter()
        .map(|(features, s)| Interaction::new(features, s, Detector::Nid))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(InteractionRanking::new(Detector::Nid, interactions, tests))
}
