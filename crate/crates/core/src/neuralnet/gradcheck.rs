//! Finite-difference verification of analytic gradients.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::optim::Regressor;
use super::{Activation, SurrogateNet, TrainError};

/// Maximum relative errors between analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub max_param_rel_error: f64,
    pub max_input_rel_error: f64,
}

impl GradientCheck {
    pub fn max_rel_error(&self) -> f64 {
        self.max_param_rel_error.max(self.max_input_rel_error)
    }
}

/// `|a − n| / max(|a|, |n|, 1e−6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Checks ∂g/∂θ and ∂g/∂x at `probe` against central differences with step `h`.
/// Only smooth activations are accepted.
pub fn gradient_check(net: &SurrogateNet, probe: &[f64], h: f64) -> Result<GradientCheck, TrainError> {
    if !net.activation().is_smooth() {
        return Err(TrainError::NonSmooth(net.activation()));
    }
    check(net, probe, h, false)
}

/// Like [`gradient_check`] but also accepts ReLU nets, provided no hidden
/// unit changes its on/off state under any of the finite-difference steps.
/// Otherwise returns [`TrainError::UnsafeProbe`].
pub fn gradient_check_piecewise(net: &SurrogateNet, probe: &[f64], h: f64) -> Result<GradientCheck, TrainError> {
    check(net, probe, h, net.activation() == Activation::Relu)
}

fn relu_pattern(net: &SurrogateNet, x: &[f64]) -> Vec<bool> {
    let mut pattern = Vec::new();
    let mut cur = x.to_vec();
    let layers = &net.mlp.layers;
    for layer in &layers[..layers.len() - 1] {
        let mut next = layer.bias.clone();
        for (j, z) in next.iter_mut().enumerate() {
            *z += (0..layer.inputs).map(|i| layer.weight(j, i) * cur[i]).sum::<f64>();
            pattern.push(*z > 0.0);
            *z = z.max(0.0);
        }
        cur = next;
    }
    pattern
}

fn check(net: &SurrogateNet, probe: &[f64], h: f64, guard_kinks: bool) -> Result<GradientCheck, TrainError> {
    if probe.len() != net.inputs() {
        return Err(TrainError::Arity { expected: net.inputs(), got: probe.len() });
    }
    let (_, dx, dtheta) = net.gradients(probe);
    let base_pattern = guard_kinks.then(|| relu_pattern(net, probe));
    let same_region = |n: &SurrogateNet, x: &[f64]| base_pattern.as_ref().is_none_or(|p| relu_pattern(n, x) == *p);

    let mut max_input: f64 = 0.0;
    let mut x = probe.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let (fp, okp) = (net.eval(&x), same_region(net, &x));
        x[i] = orig - h;
        let (fm, okm) = (net.eval(&x), same_region(net, &x));
        x[i] = orig;
        if !(okp && okm) {
            return Err(TrainError::UnsafeProbe);
        }
        max_input = max_input.max(relative_error(dx[i], (fp - fm) / (2.0 * h)));
    }

    let mut max_param: f64 = 0.0;
    let mut work = net.clone();
    let sizes = work.block_sizes();
    let mut k = 0;
    for (b, &len) in sizes.iter().enumerate() {
        for e in 0..len {
            let orig = work.blocks_mut()[b][e];
            work.blocks_mut()[b][e] = orig + h;
            let (fp, okp) = (work.eval(probe), same_region(&work, probe));
            work.blocks_mut()[b][e] = orig - h;
            let (fm, okm) = (work.eval(probe), same_region(&work, probe));
            work.blocks_mut()[b][e] = orig;
            if !(okp && okm) {
                return Err(TrainError::UnsafeProbe);
            }
            max_param = max_param.max(relative_error(dtheta[k], (fp - fm) / (2.0 * h)));
            k += 1;
        }
    }
    Ok(GradientCheck { max_param_rel_error: max_param, max_input_rel_error: max_input })
}
