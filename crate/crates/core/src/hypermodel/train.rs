use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::model::{matrix_points, points_matrix};
use super::{sphere_prior_samples, Embedding, LatentPrior, ModelA, ModelAConfig};
use crate::geom::Point3;
use crate::metrics::{chamfer_with_grad, emd_with_grad, CloudSet, DistanceKind};
use crate::nn::{
    adam_step, backward_traced, check_gradient, forward_traced, AdamConfig, AdamState,
    Fingerprint, GradCheck, Matrix, ParamVector,
};
use crate::{rng, Error, Result};

/// Radius of the ball training clouds are scaled into.
pub const NORMALIZED_RADIUS: f64 = 0.9;

/// Centers every cloud on its centroid and scales its farthest point to
/// [`NORMALIZED_RADIUS`].
pub fn normalize_dataset(dataset: &CloudSet) -> CloudSet {
    let clouds = dataset.clouds().iter().map(|c| c.normalized(NORMALIZED_RADIUS)).collect();
    CloudSet::new(clouds).expect("normalization keeps sizes")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainAConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Sphere samples decoded per cloud and step.
    pub prior_samples: usize,
    pub seed: u64,
    pub loss: DistanceKind,
    pub model: ModelAConfig,
}

impl Default for TrainAConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 8,
            lr: 1e-3,
            prior_samples: 512,
            seed: 0,
            loss: DistanceKind::Cd,
            model: ModelAConfig::default(),
        }
    }
}

impl TrainAConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.prior_samples == 0 {
            return Err(Error::Parameter("epochs, batch_size and prior_samples must be > 0".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Parameter(format!("learning rate must be > 0, got {}", self.lr)));
        }
        Ok(())
    }
}

/// Mean loss over a batch with gradients for the encoder and hypernetwork.
#[derive(Debug, Clone)]
pub struct BatchGrad {
    pub loss: f64,
    pub encoder: Vec<f64>,
    pub hyper: Vec<f64>,
    /// Discrete state of the evaluation: activation patterns, max-pool
    /// winners and matching assignments.
    pub fingerprint: Fingerprint,
}

struct Decoded {
    loss: f64,
    grad_weights: Vec<f64>,
    fingerprint: Fingerprint,
}

fn reconstruction_loss(
    model: &ModelA,
    weights: &[f64],
    prior: &[Point3],
    target: &[Point3],
    kind: DistanceKind,
) -> Result<Decoded> {
    let spec = model.target_spec();
    let w = ParamVector::from_values(spec, weights.to_vec())?;
    let trace = forward_traced(spec, &w, &points_matrix(prior))?;
    let out = matrix_points(trace.output());
    let mut fingerprint = Fingerprint::default();
    trace.fingerprint(&mut fingerprint);
    let (loss, grad) = match kind {
        DistanceKind::Cd => {
            let c = chamfer_with_grad(&out, target);
            fingerprint.extend(c.a_to_b.iter().copied());
            fingerprint.extend(c.b_to_a.iter().copied());
            (c.value, c.grad_a)
        }
        DistanceKind::Emd => {
            if prior.len() != target.len() {
                return Err(Error::Parameter(format!(
                    "EMD training needs as many prior samples as cloud points ({} vs {})",
                    prior.len(),
                    target.len()
                )));
            }
            let e = emd_with_grad(&out, target)?;
            fingerprint.extend(e.assignment.iter().copied());
            (e.value, e.grad_a)
        }
    };
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("reconstruction loss is {loss}")));
    }
    let mut grad_weights = vec![0.0; w.len()];
    backward_traced(spec, &w, &trace, &points_matrix(&grad), &mut grad_weights, false)?;
    Ok(Decoded { loss, grad_weights, fingerprint })
}

/// Mean reconstruction loss of `clouds[b]` decoded from `priors[b]`, with
/// exact gradients through the target network, the hypernetwork, the
/// max-pool and the encoder.
pub fn batch_loss_grad(
    model: &ModelA,
    clouds: &[&[Point3]],
    priors: &[Vec<Point3>],
    kind: DistanceKind,
) -> Result<BatchGrad> {
    if clouds.is_empty() || clouds.len() != priors.len() {
        return Err(Error::Size("batch needs one prior sample set per cloud".into()));
    }
    if clouds.iter().any(|c| c.is_empty()) || priors.iter().any(|p| p.is_empty()) {
        return Err(Error::Size("clouds and prior sample sets must be nonempty".into()));
    }
    let b = clouds.len();
    let encoded: Vec<_> = clouds.par_iter().map(|c| model.encode_traced(c)).collect();
    let d = model.latent_dim();
    let z = Matrix::from_vec(b, d, encoded.iter().flat_map(|e| e.0.iter().copied()).collect())?;
    let hyper_trace = forward_traced(model.hyper_spec(), model.hyper(), &z)?;
    let weights = hyper_trace.output();
    if weights.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("hypernetwork produced non-finite weights".into()));
    }

    let decoded: Vec<Decoded> = (0..b)
        .into_par_iter()
        .map(|i| reconstruction_loss(model, weights.row(i), &priors[i], clouds[i], kind))
        .collect::<Result<_>>()?;

    let scale = 1.0 / b as f64;
    let mut fingerprint = Fingerprint::default();
    let mut loss = 0.0;
    let mut dw = Matrix::zeros(b, weights.cols());
    for (i, dec) in decoded.iter().enumerate() {
        loss += dec.loss;
        fingerprint.push(dec.fingerprint.value());
        for (g, &v) in dw.row_mut(i).iter_mut().zip(&dec.grad_weights) {
            *g = v * scale;
        }
    }
    loss *= scale;

    let mut hyper = vec![0.0; model.hyper().len()];
    let dz = backward_traced(model.hyper_spec(), model.hyper(), &hyper_trace, &dw, &mut hyper, true)?
        .expect("input gradient requested");
    hyper_trace.fingerprint(&mut fingerprint);

    let per_cloud: Vec<Vec<f64>> = encoded
        .par_iter()
        .enumerate()
        .map(|(i, (_, trace, argmax))| {
            let rows = trace.output().rows();
            let mut g = Matrix::zeros(rows, d);
            for (c, &r) in argmax.iter().enumerate() {
                g.row_mut(r)[c] = dz.get(i, c);
            }
            let mut grad = vec![0.0; model.encoder().len()];
            backward_traced(model.encoder_spec(), model.encoder(), trace, &g, &mut grad, false)
                .map(|_| grad)
        })
        .collect::<Result<_>>()?;
    let mut encoder = vec![0.0; model.encoder().len()];
    for g in &per_cloud {
        for (a, v) in encoder.iter_mut().zip(g) {
            *a += v;
        }
    }
    for (_, trace, argmax) in &encoded {
        trace.fingerprint(&mut fingerprint);
        fingerprint.extend(argmax.iter().copied());
    }
    Ok(BatchGrad { loss, encoder, hyper, fingerprint })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainAReport {
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Running minimum of `epoch_losses`.
    pub best_losses: Vec<f64>,
    pub best_epoch: usize,
}

impl TrainAReport {
    pub fn initial_loss(&self) -> f64 {
        self.epoch_losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.epoch_losses.last().expect("at least one epoch")
    }
}

#[derive(Debug, Clone)]
pub struct TrainedA {
    pub model: ModelA,
    /// Fitted to the embeddings of the training clouds under `model`.
    pub prior: LatentPrior,
    pub report: TrainAReport,
}

/// Trains encoder and hypernetwork jointly with Adam on the mean
/// reconstruction loss.
///
/// Each epoch visits the clouds in a seeded random order in batches of
/// `batch_size`, decoding fresh sphere samples every step. Results depend
/// only on the configuration, not on the thread count.
pub fn train_part_a(dataset: &CloudSet, cfg: &TrainAConfig) -> Result<TrainedA> {
    cfg.validate()?;
    let mut model = ModelA::new(&cfg.model, cfg.seed)?;
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
    let mut enc_state = AdamState::new(model.encoder().len(), adam);
    let mut hyp_state = AdamState::new(model.hyper().len(), adam);
    let mut order_rng = rng::stream(cfg.seed, 0x7a01);
    let mut sample_rng = rng::stream(cfg.seed, 0x7a02);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut report = TrainAReport::default();
    let mut step = 0u64;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let clouds: Vec<&[Point3]> = batch.iter().map(|&i| dataset.clouds()[i].points()).collect();
            let priors: Vec<Vec<Point3>> = (0..batch.len())
                .map(|_| sphere_prior_samples(cfg.prior_samples, sample_rng.random()))
                .collect();
            let g = batch_loss_grad(&model, &clouds, &priors, cfg.loss).map_err(|e| {
                Error::Numeric(format!("epoch {epoch}, step {step}: {e}"))
            })?;
            if !g.loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "epoch {epoch}, step {step}: loss is {}",
                    g.loss
                )));
            }
            total += g.loss * batch.len() as f64;
            adam_step(model.encoder_mut().values_mut(), &g.encoder, &mut enc_state)?;
            adam_step(model.hyper_mut().values_mut(), &g.hyper, &mut hyp_state)?;
            step += 1;
        }
        let loss = total / dataset.len() as f64;
        let best = report.best_losses.last().map_or(loss, |&b: &f64| b.min(loss));
        if best == loss {
            report.best_epoch = epoch;
        }
        report.epoch_losses.push(loss);
        report.best_losses.push(best);
    }

    let embeddings: Vec<Embedding> = dataset.clouds().iter().map(|c| model.encode(c)).collect();
    let prior = LatentPrior::fit(&embeddings)?;
    Ok(TrainedA { model, prior, report })
}

/// Compares [`batch_loss_grad`] for one cloud against central differences
/// over the concatenated encoder and hypernetwork parameters.
pub fn composite_grad_check(
    model: &ModelA,
    cloud: &[Point3],
    prior: &[Point3],
    kind: DistanceKind,
    count: usize,
    seed: u64,
) -> Result<GradCheck> {
    let prior = vec![prior.to_vec()];
    let g = batch_loss_grad(model, &[cloud], &prior, kind)?;
    let split = model.encoder().len();
    let x0: Vec<f64> = model.encoder().values().iter().chain(model.hyper().values()).copied().collect();
    let analytic: Vec<f64> = g.encoder.iter().chain(&g.hyper).copied().collect();
    let mut probe = model.clone();
    let mut failure = None;
    let report = check_gradient(&x0, &analytic, count, seed, |x| {
        probe.encoder_mut().values_mut().copy_from_slice(&x[..split]);
        probe.hyper_mut().values_mut().copy_from_slice(&x[split..]);
        match batch_loss_grad(&probe, &[cloud], &prior, kind) {
            Ok(g) => (g.loss, g.fingerprint),
            Err(e) => {
                failure = Some(e);
                (f64::NAN, Fingerprint::default())
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
