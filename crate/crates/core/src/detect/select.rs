use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{DetectError, InteractionRanking};
use crate::neuralnet::train_glm_with_products;
use crate::perturb::PerturbationDataset;

/// Default relative improvement a new product term must bring.
pub const DEFAULT_REL_TOL: f64 = 1e-3;

/// Outcome of growing `k` over a ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    /// Validation MSE of the product-term linear model for `k = 0, 1, …` as tried.
    pub val_mse: Vec<f64>,
}

/// Adds the top-ranked interactions one at a time as product terms of a linear
/// model and stops at the first one that fails to lower validation MSE by
/// more than `rel_tol` (relative). MSE changes below `1e−10·Var(y)` count as
/// no improvement, so exactly representable targets do not chase rounding noise.
pub fn select_k(ranking: &InteractionRanking, data: &PerturbationDataset, rel_tol: f64) -> Result<KSelection, DetectError> {
    let floor = 1e-10 * label_variance(&data.labels);
    let mut fit = train_glm_with_products(data, &[])?;
    let mut path = alloc::vec![fit.val_mse];
    let mut k = 0;
    while k < ranking.len() {
        let next = train_glm_with_products(data, ranking.top(k + 1))?;
        path.push(next.val_mse);
        let improved = next.val_mse < fit.val_mse * (1.0 - rel_tol) && fit.val_mse - next.val_mse > floor;
        if !improved {
            break;
        }
        fit = next;
        k += 1;
    }
    Ok(KSelection { k, val_mse: path })
}

fn label_variance(y: &[f64]) -> f64 {
    let n = y.len().max(1) as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}
