use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::optim::weighted_mse;
use super::TrainError;
use crate::detect::Interaction;
use crate::linalg::cholesky_solve;
use crate::perturb::{PerturbationDataset, SplitView};

/// Ridge added to the (weight-averaged) normal equations, intercept excluded.
pub const GLM_RIDGE: f64 = 1e-8;

/// Squared-pivot ratio below which the design is reported as collinear.
const COLLINEAR_RATIO: f64 = 1e-7;

/// Linear model with multiplicative interaction terms:
/// `y ≈ β₀ + Σ βᵢ xᵢ + Σⱼ γⱼ Π_{i∈Iⱼ} xᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub product_terms: Vec<Vec<usize>>,
    pub product_coefficients: Vec<f64>,
    pub train_mse: f64,
    pub val_mse: f64,
    pub test_mse: f64,
    /// The normal equations were (near) singular and only the ridge kept them solvable.
    pub ill_conditioned: bool,
}

impl GlmFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut y = self.intercept;
        y += self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        for (term, g) in self.product_terms.iter().zip(&self.product_coefficients) {
            y += g * term.iter().map(|&i| x[i]).product::<f64>();
        }
        y
    }

    fn mse_on(&self, v: &SplitView<'_>) -> f64 {
        let pred: Vec<f64> = (0..v.rows()).map(|r| self.predict(v.row(r))).collect();
        weighted_mse(&pred, v.labels, v.weights)
    }
}

fn design_row(x: &[f64], terms: &[Vec<usize>], out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    out.extend_from_slice(x);
    for t in terms {
        out.push(t.iter().map(|&i| x[i]).product());
    }
}

/// Weighted least squares on the train split; reports MSE on every split.
pub fn train_glm_with_products(
    data: &PerturbationDataset,
    interactions: &[Interaction],
) -> Result<GlmFit, TrainError> {
    let d = data.dim();
    let terms: Vec<Vec<usize>> = interactions.iter().map(|i| i.features().to_vec()).collect();
    if let Some(&index) = terms.iter().flatten().find(|&&i| i >= d) {
        return Err(TrainError::InteractionOutOfRange { index, dim: d });
    }
    let train = data.train();
    if train.rows() == 0 {
        return Err(TrainError::EmptySplit);
    }
    let n = 1 + d + terms.len();
    let mut xtx = vec![0.0; n * n];
    let mut xty = vec![0.0; n];
    let mut row = Vec::with_capacity(n);
    let mut wsum = 0.0;
    for r in 0..train.rows() {
        design_row(train.row(r), &terms, &mut row);
        let w = train.weights.map_or(1.0, |w| w[r]);
        wsum += w;
        let y = train.labels[r];
        for a in 0..n {
            let wa = w * row[a];
            xty[a] += wa * y;
            for b in a..n {
                xtx[a * n + b] += wa * row[b];
            }
        }
    }
    for a in 0..n {
        xty[a] /= wsum;
        for b in a..n {
            xtx[a * n + b] /= wsum;
            xtx[b * n + a] = xtx[a * n + b];
        }
        if a > 0 {
            xtx[a * n + a] += GLM_RIDGE;
        }
    }
    let (beta, ill) = match cholesky_solve(&xtx, &xty, n) {
        Some(sol) => (sol.x, sol.min_pivot_ratio < COLLINEAR_RATIO),
        None => {
            // A column that is constant zero leaves only the ridge; fall back to a heavier one.
            let mut heavy = xtx.clone();
            for a in 0..n {
                heavy[a * n + a] += 1e-6;
            }
            let sol = cholesky_solve(&heavy, &xty, n).ok_or(TrainError::InvalidConfig("unsolvable normal equations"))?;
            (sol.x, true)
        }
    };
    let mut fit = GlmFit {
        intercept: beta[0],
        coefficients: beta[1..1 + d].to_vec(),
        product_terms: terms,
        product_coefficients: beta[1 + d..].to_vec(),
        train_mse: 0.0,
        val_mse: 0.0,
        test_mse: 0.0,
        ill_conditioned: ill,
    };
    fit.train_mse = fit.mse_on(&train);
    fit.val_mse = fit.mse_on(&data.val());
    fit.test_mse = fit.mse_on(&data.test());
    Ok(fit)
}
