use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::*;
use crate::detect::{Detector, Interaction};
use crate::perturb::{Mode, SplitSizes};
use crate::rng::from_seed;

fn random_net(d: usize, hidden: &[usize], act: Activation, linear: bool, seed: u64) -> SurrogateNet {
    let mut rng = from_seed(seed);
    let mut mlp = Mlp::new(d, hidden, act, &mut rng);
    for l in &mut mlp.layers {
        l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    }
    let lb = linear.then(|| LinearBranch { weights: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(), bias: 0.3 });
    let mut net = SurrogateNet::from_parts(act, mlp.layers, lb).unwrap();
    net.target = TargetScale { offset: 0.7, scale: 1.9 };
    net
}

fn probe(d: usize, rng: &mut crate::rng::Rng) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dataset(d: usize, n: SplitSizes, f: impl Fn(&[f64]) -> f64, seed: u64) -> PerturbationDataset {
    let mut rng = from_seed(seed);
    let mut x = Matrix::zeros(n.total(), d);
    let mut y = Vec::new();
    for r in 0..n.total() {
        for v in x.row_mut(r) {
            *v = rng.random_range(-1.0..1.0);
        }
        y.push(f(x.row(r)));
    }
    PerturbationDataset::new(Mode::Continuous, x, y, None, n, seed).unwrap()
}

#[test]
fn activation_derivatives_match_differences() {
    let h = 1e-5;
    for act in [Activation::Relu, Activation::Softplus, Activation::Square] {
        for &z in &[-2.3, -0.4, 0.37, 1.8, 35.0, -40.0] {
            let d1 = (act.value(z + h) - act.value(z - h)) / (2.0 * h);
            assert!((d1 - act.derivative(z)).abs() < 1e-6, "{act:?} {z}");
            let d2 = (act.derivative(z + h) - act.derivative(z - h)) / (2.0 * h);
            assert!((d2 - act.second_derivative(z)).abs() < 1e-6, "{act:?} {z}");
        }
    }
    // Large inputs must not overflow.
    assert_eq!(Activation::Softplus.value(800.0), 800.0);
    assert!(Activation::Softplus.value(-800.0) >= 0.0);
}

#[test]
fn smooth_gradients_match_central_differences() {
    let mut rng = from_seed(11);
    for (seed, linear) in [(1, false), (2, true)] {
        let net = random_net(5, &[8, 6, 4], Activation::Softplus, linear, seed);
        for _ in 0..5 {
            let p = probe(5, &mut rng);
            let check = gradient_check(&net, &p, 1e-5).unwrap();
            assert!(check.max_rel_error() < 1e-5, "{check:?}");
        }
    }
}

#[test]
fn relu_gradient_check_guards_kinks() {
    let net = random_net(4, &[6, 5], Activation::Relu, false, 3);
    assert_eq!(gradient_check(&net, &[0.1; 4], 1e-5), Err(TrainError::NonSmooth(Activation::Relu)));
    let mut rng = from_seed(4);
    let mut passed = 0;
    for _ in 0..20 {
        match gradient_check_piecewise(&net, &probe(4, &mut rng), 1e-5) {
            Ok(c) => {
                assert!(c.max_rel_error() < 1e-6, "{c:?}");
                passed += 1;
            }
            Err(e) => assert_eq!(e, TrainError::UnsafeProbe),
        }
    }
    assert!(passed > 10);
}

#[test]
fn batched_forward_matches_eval() {
    let net = random_net(3, &[7, 4], Activation::Softplus, true, 5);
    let m = Matrix::from_rows(&[vec![0.1, 0.2, 0.3], vec![-1.0, 0.5, 2.0]]).unwrap();
    let out = net.forward(&m).unwrap();
    for (r, o) in out.iter().enumerate() {
        assert!((o - net.eval(m.row(r))).abs() < 1e-12);
    }
    assert_eq!(net.forward(&Matrix::zeros(1, 2)), Err(TrainError::Arity { expected: 3, got: 2 }));
}

#[test]
fn hessian_matches_differences_of_gradient() {
    let net = random_net(4, &[9, 5], Activation::Softplus, true, 6);
    let x = [0.3, -0.2, 0.8, -0.6];
    let h = net.hessian(&x).unwrap();
    let step = 1e-5;
    for j in 0..4 {
        let mut xp = x;
        let mut xm = x;
        xp[j] += step;
        xm[j] -= step;
        let (gp, gm) = (net.input_gradient(&xp), net.input_gradient(&xm));
        for i in 0..4 {
            let fd = (gp[i] - gm[i]) / (2.0 * step);
            assert!((fd - h[i * 4 + j]).abs() < 1e-6 * (1.0 + fd.abs()), "{i}{j}");
        }
    }
    for i in 0..4 {
        for j in 0..4 {
            assert!((h[i * 4 + j] - h[j * 4 + i]).abs() < 1e-12);
        }
    }
    let relu = random_net(4, &[3], Activation::Relu, false, 7);
    assert_eq!(relu.hessian(&x), Err(TrainError::NonSmooth(Activation::Relu)));
}

#[test]
fn flat_params_round_trip() {
    let mut net = random_net(3, &[4, 2], Activation::Softplus, true, 8);
    let flat = net.flat_params();
    assert_eq!(flat.len(), net.mlp.param_count() + 4);
    let shifted: Vec<f64> = flat.iter().map(|v| v + 1.0).collect();
    net.set_flat_params(&shifted);
    assert_eq!(net.flat_params(), shifted);
}

#[test]
fn from_parts_rejects_bad_shapes() {
    let l1 = Layer::zeros(3, 4);
    assert!(SurrogateNet::from_parts(Activation::Relu, vec![l1.clone()], None).is_err());
    assert!(SurrogateNet::from_parts(Activation::Relu, vec![l1.clone(), Layer::zeros(5, 1)], None).is_err());
    assert!(SurrogateNet::from_parts(Activation::Relu, vec![l1.clone(), Layer::zeros(4, 2)], None).is_err());
    let lb = LinearBranch { weights: vec![0.0; 2], bias: 0.0 };
    assert!(SurrogateNet::from_parts(Activation::Relu, vec![l1.clone(), Layer::zeros(4, 1)], Some(lb)).is_err());
    assert!(SurrogateNet::from_parts(Activation::Relu, vec![l1, Layer::zeros(4, 1)], None).is_ok());
}

#[test]
fn config_validation() {
    assert!(NetConfig::nid().validate().is_ok());
    assert!(NetConfig::nid().with_hidden(&[]).validate().is_err());
    assert!(NetConfig { l1: -1.0, ..NetConfig::nid() }.validate().is_err());
    assert!(NetConfig { batch_size: 0, ..NetConfig::nid() }.validate().is_err());
    let g = NetConfig::gradient_nid();
    assert_eq!((g.activation, g.l1, g.linear_branch), (Activation::Softplus, 0.0, true));
}

#[test]
fn training_fits_a_smooth_function_and_keeps_best_snapshot() {
    let sizes = SplitSizes { train: 1500, val: 300, test: 300 };
    let data = dataset(3, sizes, |x| 2.0 * x[0] * x[1] + x[2] + 5.0, 1);
    let cfg = NetConfig { hidden: vec![32, 16], max_epochs: 60, l1: 0.0, ..NetConfig::nid() };
    let net = train(&cfg, &data).unwrap();
    let best = net.log.best_epoch().unwrap();
    assert!(net.log.epochs.iter().all(|e| e.val_mse >= best.val_mse));
    assert!(best.val_mse < 0.02, "{best:?}");
    // The returned snapshot is the logged best one.
    let val = data.val();
    let pred: Vec<f64> = (0..val.rows()).map(|i| net.eval(val.row(i))).collect();
    let mse = pred.iter().zip(val.labels).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / val.rows() as f64;
    assert!((mse - best.val_mse).abs() < 1e-9 * (1.0 + mse));
    // Same seed, same net.
    assert_eq!(train(&cfg, &data).unwrap(), net);
}

#[test]
fn l1_shrinks_first_layer() {
    let sizes = SplitSizes { train: 800, val: 200, test: 200 };
    let data = dataset(4, sizes, |x| x[0] + x[1], 2);
    let base = NetConfig { hidden: vec![16], max_epochs: 30, patience: 30, l1: 0.0, ..NetConfig::nid() };
    let plain = train(&base, &data).unwrap();
    let sparse = train(&NetConfig { l1: 1e-2, ..base }, &data).unwrap();
    assert!(sparse.first_layer_l1() < plain.first_layer_l1());
}

#[test]
fn target_scale_uses_weights() {
    let t = TargetScale::fit(&[1.0, 3.0], Some(&[3.0, 1.0]));
    assert!((t.offset - 1.5).abs() < 1e-12);
    let c = TargetScale::fit(&[2.0, 2.0], None);
    assert!(c.scale > 0.0);
}

#[test]
fn glm_recovers_product_terms() {
    let sizes = SplitSizes { train: 400, val: 100, test: 100 };
    let data = dataset(3, sizes, |x| 1.0 + 2.0 * x[0] - x[2] + 3.0 * x[0] * x[1], 3);
    let plain = train_glm_with_products(&data, &[]).unwrap();
    assert!(plain.val_mse > 0.1);
    let term = Interaction::new(vec![1, 0], 1.0, Detector::Nid).unwrap();
    let fit = train_glm_with_products(&data, &[term]).unwrap();
    assert!(fit.val_mse < 1e-12 && fit.test_mse < 1e-12);
    assert!((fit.intercept - 1.0).abs() < 1e-6);
    assert!((fit.product_coefficients[0] - 3.0).abs() < 1e-6);
    assert!((fit.coefficients[0] - 2.0).abs() < 1e-6 && fit.coefficients[1].abs() < 1e-6);
    assert!((fit.predict(&[0.5, 0.5, 0.0]) - 2.75).abs() < 1e-6);
    let out = Interaction::new(vec![0, 7], 1.0, Detector::Nid).unwrap();
    assert_eq!(train_glm_with_products(&data, &[out]), Err(TrainError::InteractionOutOfRange { index: 7, dim: 3 }));
}

#[test]
fn glm_flags_duplicate_columns() {
    let sizes = SplitSizes { train: 200, val: 50, test: 50 };
    let mut data = dataset(3, sizes, |x| x[0], 4);
    for r in 0..sizes.total() {
        let v = data.inputs.row(r)[0];
        data.inputs.row_mut(r)[1] = v;
    }
    let fit = train_glm_with_products(&data, &[]).unwrap();
    assert!(fit.ill_conditioned);
    assert!(fit.val_mse < 1e-10);
}
