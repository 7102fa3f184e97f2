//! Forward propagation of values, input gradients and input Hessians.

use alloc::vec;
use alloc::vec::Vec;

use super::Mlp;
use crate::matrix::gemm_ab;

/// Input Hessian of the MLP output (without the target scale), row-major `d×d`.
pub(crate) fn hessian(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let dd = d * d;
    let act = mlp.activation;
    let first = &mlp.layers[0];

    // Pre-activations of the first layer: affine in x, so zero Hessian.
    let mut val: Vec<f64> = (0..first.outputs)
        .map(|j| first.bias[j] + (0..d).map(|i| first.weight(j, i) * x[i]).sum::<f64>())
        .collect();
    let mut grad: Vec<f64> = first.weights.clone();
    let mut hess: Vec<f64> = vec![0.0; first.outputs * dd];

    for layer in &mlp.layers[1..] {
        // Activation of the previous layer.
        for j in 0..val.len() {
            let z = val[j];
            let (s1, s2) = (act.derivative(z), act.second_derivative(z));
            let g = &grad[j * d..(j + 1) * d];
            let h = &mut hess[j * dd..(j + 1) * dd];
            for a in 0..d {
                for b in 0..d {
                    h[a * d + b] = s2 * g[a] * g[b] + s1 * h[a * d + b];
                }
            }
            val[j] = act.value(z);
            grad[j * d..(j + 1) * d].iter_mut().for_each(|v| *v *= s1);
        }
        // Affine map into this layer's pre-activations.
        let mut nval = layer.bias.clone();
        for (j, v) in nval.iter_mut().enumerate() {
            *v += (0..layer.inputs).map(|i| layer.weight(j, i) * val[i]).sum::<f64>();
        }
        let mut ngrad = vec![0.0; layer.outputs * d];
        gemm_ab(layer.outputs, layer.inputs, d, &layer.weights, &grad, &mut ngrad, false);
        let mut nhess = vec![0.0; layer.outputs * dd];
        gemm_ab(layer.outputs, layer.inputs, dd, &layer.weights, &hess, &mut nhess, false);
        val = nval;
        grad = ngrad;
        hess = nhess;
    }
    hess
}
