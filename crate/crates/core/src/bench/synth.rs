use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::FnModel;

/// Number of inputs of every synthetic function.
pub const SYNTH_DIM: usize = 10;

/// Synthetic data-generating functions with known interactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SynthFunction {
    /// `10 x₁x₂ + Σ_{i=3}^{10} xᵢ`
    F1,
    /// `x₁x₂ + Σ_{i=3}^{10} xᵢ`
    F2,
    /// `exp(|x₁ + x₂|) + Σ_{i=3}^{10} xᵢ`
    F3,
    /// `10 x₁x₂x₃ + Σ_{i=4}^{10} xᵢ`
    F4,
}

impl SynthFunction {
    pub const ALL: [SynthFunction; 4] = [SynthFunction::F1, SynthFunction::F2, SynthFunction::F3, SynthFunction::F4];

    pub fn eval(self, x: &[f64]) -> Result<f64, BenchError> {
        if x.len() != SYNTH_DIM {
            return Err(BenchError::Arity { expected: SYNTH_DIM, got: x.len() });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(self, x: &[f64]) -> f64 {
        match self {
            SynthFunction::F1 => 10.0 * x[0] * x[1] + x[2..].iter().sum::<f64>(),
            SynthFunction::F2 => x[0] * x[1] + x[2..].iter().sum::<f64>(),
            SynthFunction::F3 => libm::exp((x[0] + x[1]).abs()) + x[2..].iter().sum::<f64>(),
            SynthFunction::F4 => 10.0 * x[0] * x[1] * x[2] + x[3..].iter().sum::<f64>(),
        }
    }

    /// Ground-truth interactions, 0-based.
    pub fn ground_truth(self) -> Vec<Vec<usize>> {
        match self {
            SynthFunction::F4 => vec![vec![0, 1, 2]],
            _ => vec![vec![0, 1]],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SynthFunction::F1 => "F1",
            SynthFunction::F2 => "F2",
            SynthFunction::F3 => "F3",
            SynthFunction::F4 => "F4",
        }
    }

    /// The exact function as an in-process black box.
    pub fn model(self) -> FnModel<impl Fn(&[f64]) -> f64 + Clone + Send + Sync> {
        FnModel::new(self.name(), SYNTH_DIM, move |x: &[f64]| self.eval_unchecked(x))
    }
}

impl core::str::FromStr for SynthFunction {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "F1" | "f1" => Ok(SynthFunction::F1),
            "F2" | "f2" => Ok(SynthFunction::F2),
            "F3" | "f3" => Ok(SynthFunction::F3),
            "F4" | "f4" => Ok(SynthFunction::F4),
            _ => Err(BenchError::UnknownFunction),
        }
    }
}
