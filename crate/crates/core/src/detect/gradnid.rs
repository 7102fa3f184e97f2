use alloc::vec;
use alloc::vec::Vec;

use super::{DetectError, Detector, Interaction, InteractionRanking};
use crate::SurrogateNet;

/// Step for the finite difference of analytic Hessians used at order 3.
pub const THIRD_ORDER_STEP: f64 = 1e-3;

/// Mixed partial derivative of `net` at `probe` for every index set of the
/// given order. Order 2 is exact; order 3 takes a central difference of the
/// exact Hessian along the largest index.
pub fn mixed_partials(net: &SurrogateNet, probe: &[f64], order: usize) -> Result<Vec<(Vec<usize>, f64)>, DetectError> {
    let d = net.inputs();
    if probe.len() != d {
        return Err(DetectError::ProbeArity { expected: d, got: probe.len() });
    }
    match order {
        2 => {
            let h = net.hessian(probe)?;
            let mut out = Vec::with_capacity(d * (d - 1) / 2);
            for i in 0..d {
                for j in i + 1..d {
                    out.push((vec![i, j], h[i * d + j]));
                }
            }
            Ok(out)
        }
        3 => {
            let step = THIRD_ORDER_STEP;
            let mut x = probe.to_vec();
            let mut out = Vec::new();
            for k in 2..d {
                let orig = x[k];
                x[k] = orig + step;
                let hp = net.hessian(&x)?;
                x[k] = orig - step;
                let hm = net.hessian(&x)?;
                x[k] = orig;
                for i in 0..k {
                    for j in i + 1..k {
                        out.push((vec![i, j, k], (hp[i * d + j] - hm[i * d + j]) / (2.0 * step)));
                    }
                }
            }
            out.sort_by(|a, b| a.0.cmp(&b.0));
            Ok(out)
        }
        0 | 1 => Err(DetectError::InvalidOrder(order)),
        _ => Err(DetectError::OrderTooHigh(order)),
    }
}

/// Ranks every index set of size `order` by `ω(I) = (∂^|I| g / ∂x_I)²`.
/// The parallel linear branch has no mixed partials and never contributes.
pub fn gradient_nid(net: &SurrogateNet, probe: &[f64], order: usize) -> Result<InteractionRanking, DetectError> {
    let partials = mixed_partials(net, probe, order)?;
    let tests = partials.len();
    let interactions = partials
        .into_iter()
        .map(|(features, p)| Interaction::new(features, p * p, Detector::GradNid))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(InteractionRanking::new(Detector::GradNid, interactions, tests))
}
