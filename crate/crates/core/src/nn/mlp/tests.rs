use super::*;
use crate::nn::{grad_check, GradCheck, LossKind};
use crate::geom::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
        .unwrap()
}

#[test]
fn param_count_and_init() {
    let spec = MlpSpec::new(vec![3, 64, 3], Activation::Relu).unwrap();
    assert_eq!(spec.param_count(), 451);
    let target = MlpSpec::new(vec![3, 64, 64, 64, 3], Activation::Relu).unwrap();
    assert_eq!(target.param_count(), 8771);
    let phi = MlpSpec::new(vec![5, 64, 64, 3], Activation::Tanh).unwrap();
    assert_eq!(phi.param_count(), 4739);
    let p = init_params(&spec, 1);
    for (i, _) in spec.layouts().iter().enumerate() {
        assert!(p.layer(i).1.iter().all(|&b| b == 0.0));
        let limit = (6.0 / (spec.layouts()[i].fan_in + spec.layouts()[i].fan_out) as f64).sqrt();
        assert!(p.layer(i).0.iter().all(|w| w.abs() <= limit));
    }
    assert_eq!(p, init_params(&spec, 1));
    assert_ne!(p, init_params(&spec, 2));
}

#[test]
fn rejects_bad_specs() {
    assert!(MlpSpec::new(vec![3], Activation::Relu).is_err());
    assert!(MlpSpec::new(vec![3, 0, 2], Activation::Relu).is_err());
}

#[test]
fn single_linear_layer_arithmetic() {
    let spec = MlpSpec::new(vec![2, 1], Activation::Relu).unwrap();
    let p = ParamVector::from_values(&spec, vec![1.0, 1.0, 0.5]).unwrap();
    let y = forward(&spec, &p, &Matrix::from_rows(&[[1.0, 2.0]])).unwrap();
    assert_eq!(y.data(), &[3.5]);
}

#[test]
fn zero_params_give_zero_output() {
    let spec = MlpSpec::new(vec![4, 8, 8, 3], Activation::Tanh).unwrap();
    let p = ParamVector::zeros(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let y = forward(&spec, &p, &random_matrix(&mut rng, 5, 4)).unwrap();
    assert!(y.data().iter().all(|&v| v == 0.0));
}

#[test]
fn width_mismatch_is_a_shape_error() {
    let spec = MlpSpec::new(vec![3, 2], Activation::Relu).unwrap();
    let p = init_params(&spec, 0);
    assert!(matches!(forward(&spec, &p, &Matrix::zeros(1, 4)), Err(Error::Shape(_))));
    let bad_grad = Matrix::zeros(1, 3);
    assert!(matches!(backward(&spec, &p, &Matrix::zeros(1, 3), &bad_grad), Err(Error::Shape(_))));
}

#[test]
fn relu_net_is_affine_where_all_units_are_active() {
    // Positive weights and inputs keep every preactivation positive, so the
    // net equals the product of its weight matrices.
    let spec = MlpSpec::new(vec![2, 3, 2], Activation::Relu).unwrap();
    let vals = vec![
        0.5, 0.25, 1.0, 2.0, 0.75, 0.125, // W1 (3x2)
        0.1, 0.2, 0.3, // b1
        1.0, -2.0, 0.5, 0.25, 3.0, -1.0, // W2 (2x3)
        0.05, -0.05, // b2
    ];
    let p = ParamVector::from_values(&spec, vals).unwrap();
    let x = [0.7, 1.3];
    let h: Vec<f64> = (0..3)
        .map(|o| p.layer(0).0[2 * o] * x[0] + p.layer(0).0[2 * o + 1] * x[1] + p.layer(0).1[o])
        .collect();
    assert!(h.iter().all(|&v| v > 0.0));
    let expected: Vec<f64> = (0..2)
        .map(|o| (0..3).map(|i| p.layer(1).0[3 * o + i] * h[i]).sum::<f64>() + p.layer(1).1[o])
        .collect();
    let y = forward(&spec, &p, &Matrix::from_rows(&[x])).unwrap();
    for (a, b) in y.data().iter().zip(&expected) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn zero_loss_gradient_gives_zero_gradients() {
    let spec = MlpSpec::new(vec![3, 5, 2], Activation::Tanh).unwrap();
    let p = init_params(&spec, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_matrix(&mut rng, 4, 3);
    let (gp, gx) = backward(&spec, &p, &x, &Matrix::zeros(4, 2)).unwrap();
    assert!(gp.values().iter().all(|&v| v == 0.0));
    assert!(gx.data().iter().all(|&v| v == 0.0));
}

#[test]
fn linear_layer_quadratic_loss_closed_form() {
    // L = (W x + b - t)^2 on one sample: dL/dW = 2 (y - t) x^T, dL/db = 2 (y - t).
    let spec = MlpSpec::new(vec![3, 2], Activation::Relu).unwrap();
    let p = ParamVector::from_values(&spec, vec![0.2, -0.4, 0.6, 1.0, 0.5, -0.3, 0.1, -0.2]).unwrap();
    let x = [0.3, -1.2, 2.0];
    let t = Matrix::from_rows(&[[0.5, -0.5]]);
    let y = forward(&spec, &p, &Matrix::from_rows(&[x])).unwrap();
    let r: Vec<f64> = (0..2).map(|o| y.get(0, o) - t.get(0, o)).collect();
    let loss_grad = Matrix::from_rows(&[[2.0 * r[0], 2.0 * r[1]]]);
    let (gp, gx) = backward(&spec, &p, &Matrix::from_rows(&[x]), &loss_grad).unwrap();
    for o in 0..2 {
        for i in 0..3 {
            assert!((gp.values()[o * 3 + i] - 2.0 * r[o] * x[i]).abs() < 1e-12);
        }
        assert!((gp.values()[6 + o] - 2.0 * r[o]).abs() < 1e-12);
    }
    for i in 0..3 {
        let w = p.layer(0).0;
        let expected = 2.0 * r[0] * w[i] + 2.0 * r[1] * w[3 + i];
        assert!((gx.get(0, i) - expected).abs() < 1e-12);
    }
}

#[test]
fn backward_matches_finite_differences_on_random_nets() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..12 {
        let depth = rng.random_range(1..4);
        let mut widths = vec![rng.random_range(1..6)];
        for _ in 0..depth {
            widths.push(rng.random_range(1..17));
        }
        let act = if trial % 2 == 0 { Activation::Relu } else { Activation::Tanh };
        let spec = MlpSpec::new(widths, act).unwrap();
        let p = init_params(&spec, trial);
        let x = random_matrix(&mut rng, 6, spec.input_width());
        let t = random_matrix(&mut rng, 6, spec.output_width());
        let r = grad_check(&spec, &p, &x, &LossKind::Quadratic(t), 400, trial).unwrap();
        assert!(r.max_rel_error <= 1e-5, "trial {trial}: {r:?}");
        assert!(r.checked > 0);
    }
}

#[test]
fn input_gradient_matches_finite_differences() {
    let spec = MlpSpec::new(vec![4, 9, 7, 3], Activation::Tanh).unwrap();
    let p = init_params(&spec, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_matrix(&mut rng, 3, 4);
    let w = random_matrix(&mut rng, 3, 3);
    let f = |x: &Matrix| -> f64 {
        let y = forward(&spec, &p, x).unwrap();
        y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
    };
    let (_, gx) = backward(&spec, &p, &x, &w).unwrap();
    for k in 0..x.data().len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp.data_mut()[k] += 1e-6;
        xm.data_mut()[k] -= 1e-6;
        let fd = (f(&xp) - f(&xm)) / 2e-6;
        assert!((fd - gx.data()[k]).abs() < 1e-8);
    }
}

#[test]
fn quadratic_linear_check_is_tight() {
    let spec = MlpSpec::new(vec![5, 4], Activation::Relu).unwrap();
    let p = init_params(&spec, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_matrix(&mut rng, 8, 5);
    let t = random_matrix(&mut rng, 8, 4);
    let r = grad_check(&spec, &p, &x, &LossKind::Quadratic(t), 200, 0).unwrap();
    assert!(r.max_rel_error <= 1e-8, "{r:?}");
    assert_eq!(r.checked, spec.param_count());
}

#[test]
fn chamfer_loss_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..5 {
        let spec = MlpSpec::new(vec![3, 12, 12, 3], Activation::Relu).unwrap();
        let p = init_params(&spec, seed);
        let x = random_matrix(&mut rng, 10, 3);
        let target: Vec<Point3> = (0..8)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let r = grad_check(&spec, &p, &x, &LossKind::Chamfer(target), 250, seed).unwrap();
        assert!(r.max_rel_error <= 1e-4, "{r:?}");
    }
}

#[test]
fn empty_subset_has_zero_error() {
    let spec = MlpSpec::new(vec![2, 2], Activation::Relu).unwrap();
    let p = init_params(&spec, 0);
    let x = Matrix::zeros(1, 2);
    let r = grad_check(&spec, &p, &x, &LossKind::Quadratic(Matrix::zeros(1, 2)), 0, 0).unwrap();
    assert_eq!(r, GradCheck { max_rel_error: 0.0, checked: 0, skipped: 0 });
}

#[test]
fn batch_permutation_equivariance() {
    let spec = MlpSpec::new(vec![3, 10, 10, 2], Activation::Relu).unwrap();
    let p = init_params(&spec, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_matrix(&mut rng, 6, 3);
    let g = random_matrix(&mut rng, 6, 2);
    let perm = [3, 0, 5, 1, 4, 2];
    let y = forward(&spec, &p, &x).unwrap();
    let yp = forward(&spec, &p, &x.permute_rows(&perm)).unwrap();
    assert_eq!(yp, y.permute_rows(&perm));
    let (gp, gx) = backward(&spec, &p, &x, &g).unwrap();
    let (gpp, gxp) = backward(&spec, &p, &x.permute_rows(&perm), &g.permute_rows(&perm)).unwrap();
    assert_eq!(gxp, gx.permute_rows(&perm));
    for (a, b) in gp.values().iter().zip(gpp.values()) {
        assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
    }
}
