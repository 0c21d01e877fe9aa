use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geom::{Point3, PointCloud};
use crate::metrics::{CloudSet, DistanceKind};
use crate::nn::{backward, Activation, Matrix};
use crate::Error;

fn tiny_config() -> ModelAConfig {
    ModelAConfig {
        latent_dim: 8,
        encoder_hidden: vec![12],
        hyper_hidden: vec![10],
        target_hidden: vec![8, 8],
        activation: Activation::Relu,
    }
}

fn random_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::new(
        (0..n)
            .map(|_| Point3::new(rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)))
            .collect(),
    )
    .unwrap()
}

#[test]
fn default_architecture_sizes() {
    let m = ModelA::new(&ModelAConfig::default(), 0).unwrap();
    assert_eq!(m.latent_dim(), 128);
    assert_eq!(m.target_spec().param_count(), 8771);
    assert_eq!(m.hyper_spec().output_width(), 8771);
    assert_eq!(m.encoder_spec().widths(), &[3, 64, 128, 128]);
}

#[test]
fn from_parts_rejects_mismatched_hypernetwork() {
    let m = ModelA::new(&tiny_config(), 0).unwrap();
    let other = ModelA::new(&ModelAConfig { target_hidden: vec![4], ..tiny_config() }, 0).unwrap();
    let r = ModelA::from_parts(
        m.encoder_spec().clone(),
        m.encoder().clone(),
        m.hyper_spec().clone(),
        m.hyper().clone(),
        other.target_spec().clone(),
    );
    assert!(matches!(r, Err(Error::Shape(_))));
}

#[test]
fn encode_is_permutation_invariant() {
    let m = ModelA::new(&tiny_config(), 1).unwrap();
    let c = random_cloud(40, 2);
    let mut pts = c.points().to_vec();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    let shuffled = PointCloud::new(pts).unwrap();
    assert_eq!(m.encode(&c), m.encode(&shuffled));
    assert_eq!(m.encode(&c), m.encode(&c));
}

#[test]
fn repeated_point_encodes_like_the_point() {
    let m = ModelA::new(&tiny_config(), 1).unwrap();
    let p = Point3::new(0.1, -0.4, 0.3);
    let one = PointCloud::new(vec![p]).unwrap();
    let many = PointCloud::new(vec![p; 17]).unwrap();
    assert_eq!(m.encode(&one), m.encode(&many));
}

#[test]
fn target_weights_shape_and_errors() {
    let m = ModelA::new(&tiny_config(), 4).unwrap();
    let z = m.encode(&random_cloud(10, 5));
    let w = m.target_weights(&z).unwrap();
    assert_eq!(w.len(), m.target_spec().param_count());
    assert_eq!(w, m.target_weights(&z).unwrap());
    let bad = Embedding::new(vec![0.0; 3]).unwrap();
    assert!(matches!(m.target_weights(&bad), Err(Error::Shape(_))));
}

#[test]
fn target_weights_directional_derivative() {
    // u . (W(z + hv) - W(z - hv)) / 2h must equal (J^T u) . v, with J^T u
    // from the reverse pass.
    let cfg = ModelAConfig { activation: Activation::Tanh, ..tiny_config() };
    let m = ModelA::new(&cfg, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let z: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let u: Vec<f64> = (0..m.target_spec().param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let at = |s: f64| {
        let zz = z.iter().zip(&v).map(|(a, b)| a + s * b).collect();
        m.target_weights(&Embedding::new(zz).unwrap()).unwrap().into_values()
    };
    let h = 1e-6;
    let (wp, wm) = (at(h), at(-h));
    let fd: f64 = u.iter().zip(wp.iter().zip(&wm)).map(|(ui, (a, b))| ui * (a - b) / (2.0 * h)).sum();
    let (_, jtu) = backward(
        m.hyper_spec(),
        m.hyper(),
        &Matrix::from_vec(1, 8, z.clone()).unwrap(),
        &Matrix::from_vec(1, u.len(), u.clone()).unwrap(),
    )
    .unwrap();
    let exact: f64 = jtu.data().iter().zip(&v).map(|(a, b)| a * b).sum();
    assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{fd} vs {exact}");
    let dw: f64 = wp.iter().zip(at(0.0)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(dw < 1e-4);
}

#[test]
fn zero_hypernetwork_gives_constant_reconstruction() {
    let mut m = ModelA::new(&tiny_config(), 8).unwrap();
    m.hyper_mut().values_mut().iter_mut().for_each(|v| *v = 0.0);
    let r = m.reconstruct(&random_cloud(20, 9), 50, 1).unwrap();
    assert!(r.points().iter().all(|p| *p == Point3::ZERO));
}

#[test]
fn reconstruct_is_deterministic() {
    let m = ModelA::new(&tiny_config(), 10).unwrap();
    let c = random_cloud(30, 11);
    assert_eq!(m.reconstruct(&c, 64, 5).unwrap(), m.reconstruct(&c, 64, 5).unwrap());
    assert_ne!(m.reconstruct(&c, 64, 5).unwrap(), m.reconstruct(&c, 64, 6).unwrap());
    assert!(matches!(m.reconstruct(&c, 0, 5), Err(Error::Size(_))));
}

#[test]
fn prior_samples_lie_on_the_unit_sphere() {
    let s = sphere_prior_samples(5000, 3);
    assert!(s.iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
    // Uniformity: the mean is near the origin (sigma per axis is 1/sqrt(3n)).
    let mean = s.iter().fold(Point3::ZERO, |a, &p| a + p) / s.len() as f64;
    assert!(mean.norm() < 5.0 / (3.0 * 5000.0f64).sqrt());
}

#[test]
fn sphere_mesh_copies_connectivity() {
    let m = ModelA::new(&tiny_config(), 12).unwrap();
    let z = m.encode(&random_cloud(10, 13));
    let mesh = m.sphere_mesh(&z, 5).unwrap();
    let sphere = crate::geom::unit_sphere_quadgrid(5).unwrap();
    assert_eq!(mesh.faces(), sphere.faces());
    assert_eq!(mesh.vertices().len(), sphere.vertices().len());
    assert_eq!(mesh.euler_characteristic(), 2);
    assert!(mesh.is_closed_manifold());
}

#[test]
fn interpolation_endpoints() {
    let z1 = Embedding::new(vec![1.0, -2.0, 0.5]).unwrap();
    let z2 = Embedding::new(vec![-1.0, 2.0, -0.5]).unwrap();
    assert_eq!(interpolate(&z1, &z2, 0.0).unwrap(), z1);
    assert_eq!(interpolate(&z1, &z2, 1.0).unwrap(), z2);
    assert_eq!(interpolate(&z1, &z2, 0.5).unwrap().values(), &[0.0, 0.0, 0.0]);
    assert!(matches!(interpolate(&z1, &z2, 1.5), Err(Error::Parameter(_))));
    assert!(matches!(interpolate(&z1, &z2, -0.1), Err(Error::Parameter(_))));
}

#[test]
fn latent_prior_sampling() {
    assert!(matches!(sample_latent(&LatentPrior::unfitted(), 0), Err(Error::State(_))));
    let z = Embedding::new(vec![0.5, -1.5]).unwrap();
    let single = LatentPrior::fit(std::slice::from_ref(&z)).unwrap();
    assert_eq!(sample_latent(&single, 3).unwrap(), z);

    let prior = LatentPrior::from_moments(vec![1.0, -2.0, 0.0], vec![0.25, 4.0, 1.0]).unwrap();
    assert_eq!(prior.sample(9).unwrap(), prior.sample(9).unwrap());
    let n = 10_000;
    let mut sums = [0.0; 3];
    for seed in 0..n {
        for (s, v) in sums.iter_mut().zip(prior.sample(seed).unwrap().values()) {
            *s += v;
        }
    }
    for ((s, m), v) in sums.iter().zip(prior.mean().unwrap()).zip(prior.variance().unwrap()) {
        assert!((s / n as f64 - m).abs() <= 5.0 * v.sqrt() / (n as f64).sqrt());
    }
}

#[test]
fn prior_fit_moments() {
    let zs = [vec![1.0, 0.0], vec![3.0, 0.0]].map(|v| Embedding::new(v).unwrap());
    let p = LatentPrior::fit(&zs).unwrap();
    assert_eq!(p.mean().unwrap(), &[2.0, 0.0]);
    assert_eq!(p.variance().unwrap(), &[1.0, 0.0]);
    assert!(LatentPrior::fit(&[]).is_err());
    assert!(LatentPrior::from_moments(vec![0.0], vec![-1.0]).is_err());
}

#[test]
fn composite_gradient_chamfer() {
    for seed in 0..4 {
        let m = ModelA::new(&tiny_config(), seed).unwrap();
        let cloud = random_cloud(24, 100 + seed);
        let prior = sphere_prior_samples(20, seed);
        let r = composite_grad_check(&m, cloud.points(), &prior, DistanceKind::Cd, 200, seed).unwrap();
        assert!(r.checked >= 200, "{r:?}");
        assert!(r.max_rel_error <= 1e-4, "seed {seed}: {r:?}");
    }
}

#[test]
fn composite_gradient_emd() {
    let m = ModelA::new(&tiny_config(), 3).unwrap();
    let cloud = random_cloud(16, 4);
    let prior = sphere_prior_samples(16, 5);
    let r = composite_grad_check(&m, cloud.points(), &prior, DistanceKind::Emd, 200, 0).unwrap();
    assert!(r.max_rel_error <= 1e-4, "{r:?}");
    let short = sphere_prior_samples(8, 5);
    assert!(matches!(
        batch_loss_grad(&m, &[cloud.points()], &[short], DistanceKind::Emd),
        Err(Error::Parameter(_))
    ));
}

#[test]
fn batch_gradient_is_mean_of_single_gradients() {
    let m = ModelA::new(&tiny_config(), 5).unwrap();
    let a = random_cloud(12, 1);
    let b = random_cloud(12, 2);
    let pa = sphere_prior_samples(10, 1);
    let pb = sphere_prior_samples(10, 2);
    let both = batch_loss_grad(&m, &[a.points(), b.points()], &[pa.clone(), pb.clone()], DistanceKind::Cd).unwrap();
    let ga = batch_loss_grad(&m, &[a.points()], &[pa], DistanceKind::Cd).unwrap();
    let gb = batch_loss_grad(&m, &[b.points()], &[pb], DistanceKind::Cd).unwrap();
    assert!((both.loss - 0.5 * (ga.loss + gb.loss)).abs() < 1e-14);
    for (x, (y, z)) in both.hyper.iter().zip(ga.hyper.iter().zip(&gb.hyper)) {
        assert!((x - 0.5 * (y + z)).abs() < 1e-12);
    }
    for (x, (y, z)) in both.encoder.iter().zip(ga.encoder.iter().zip(&gb.encoder)) {
        assert!((x - 0.5 * (y + z)).abs() < 1e-12);
    }
}

fn toy_dataset() -> CloudSet {
    let clouds = (0..3).map(|s| random_cloud(32, 50 + s)).collect();
    normalize_dataset(&CloudSet::new(clouds).unwrap())
}

#[test]
fn normalization_targets_the_unit_ball() {
    let ds = toy_dataset();
    for c in ds.clouds() {
        let max = c.points().iter().map(|p| p.norm()).fold(0.0, f64::max);
        assert!((max - NORMALIZED_RADIUS).abs() < 1e-12);
        assert!(c.centroid().norm() < 1e-12);
    }
}

#[test]
fn training_is_deterministic_and_tracks_best() {
    let cfg = TrainAConfig {
        epochs: 6,
        batch_size: 2,
        lr: 1e-2,
        prior_samples: 24,
        seed: 11,
        loss: DistanceKind::Cd,
        model: tiny_config(),
    };
    let ds = toy_dataset();
    let a = train_part_a(&ds, &cfg).unwrap();
    let b = train_part_a(&ds, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.report, b.report);
    assert_eq!(a.prior, b.prior);
    assert!(a.report.epoch_losses.iter().all(|l| l.is_finite()));
    assert!(a.report.best_losses.windows(2).all(|w| w[1] <= w[0]));
    let best = a.report.best_losses.last().unwrap();
    assert_eq!(*best, a.report.epoch_losses[a.report.best_epoch]);
    assert!(a.prior.is_fitted());
    assert_ne!(a.model, ModelA::new(&tiny_config(), 11).unwrap());
}

#[test]
fn training_rejects_bad_config() {
    let cfg = TrainAConfig { epochs: 0, ..TrainAConfig::default() };
    assert!(matches!(train_part_a(&toy_dataset(), &cfg), Err(Error::Parameter(_))));
}

#[test]
fn training_with_emd() {
    let cfg = TrainAConfig {
        epochs: 3,
        batch_size: 3,
        lr: 1e-2,
        prior_samples: 32,
        seed: 1,
        loss: DistanceKind::Emd,
        model: tiny_config(),
    };
    let r = train_part_a(&toy_dataset(), &cfg).unwrap();
    assert_eq!(r.report.epoch_losses.len(), 3);
}
