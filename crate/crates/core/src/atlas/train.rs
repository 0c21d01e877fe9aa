use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{conditioned_batch, ModelB, ModelBConfig};
use crate::geom::{Point3, PointCloud, SpatialIndex};
use crate::hypermodel::{sphere_prior_samples, Embedding, ModelA};
use crate::metrics::{chamfer_with_grad, CloudSet};
use crate::nn::{
    adam_step, backward_traced, check_gradient, forward_traced, AdamConfig, AdamState,
    Fingerprint, GradCheck, Matrix, ParamVector,
};
use crate::{rng, Error, Result};

/// UV neighbors joined by an edge in the length regularizer.
pub const UV_NEIGHBORS: usize = 4;

/// Where the regression target `V(p)` is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeighborSource {
    /// Nearest points of the input cloud.
    #[default]
    Input,
    /// Nearest points of a dense Part A reconstruction.
    Reconstruction,
}

impl NeighborSource {
    pub fn name(self) -> &'static str {
        match self {
            NeighborSource::Input => "input",
            NeighborSource::Reconstruction => "reconstruction",
        }
    }
}

impl std::str::FromStr for NeighborSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "input" => Ok(NeighborSource::Input),
            "reconstruction" => Ok(NeighborSource::Reconstruction),
            _ => Err(Error::Parameter(format!(
                "unknown neighbor source '{s}' (expected input or reconstruction)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainBConfig {
    /// Neighborhood size of `V(p)`.
    pub k: usize,
    /// Weight of the edge-length term.
    pub lambda: f64,
    /// Random UV samples per patch and step.
    pub uv_samples: usize,
    /// Condition points per step.
    pub patches: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Cosine-annealed learning rate ends at `lr * final_lr_fraction`;
    /// 1 keeps it constant.
    pub final_lr_fraction: f64,
    pub seed: u64,
    pub neighbors: NeighborSource,
    pub model: ModelBConfig,
}

impl Default for TrainBConfig {
    fn default() -> Self {
        Self {
            k: 16,
            lambda: 1e-4,
            uv_samples: 32,
            patches: 64,
            epochs: 600,
            lr: 1e-3,
            final_lr_fraction: 0.01,
            seed: 0,
            neighbors: NeighborSource::Input,
            model: ModelBConfig::default(),
        }
    }
}

impl TrainBConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.k < 3 {
            errors.push(format!("k must be >= 3, got {}", self.k));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            errors.push(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.uv_samples < 2 || self.patches == 0 || self.epochs == 0 {
            errors.push("uv_samples must be >= 2, patches and epochs > 0".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            errors.push(format!("learning rate must be > 0, got {}", self.lr));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            errors.push(format!(
                "final_lr_fraction must be in (0, 1], got {}",
                self.final_lr_fraction
            ));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Parameter(errors.join("; ")))
        }
    }
}

/// One training patch: condition point, UV samples with their edge set and
/// the regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSample {
    pub p: Point3,
    pub uv: Vec<[f64; 2]>,
    pub edges: Vec<(usize, usize)>,
    pub target: Vec<Point3>,
}

/// `n` uniform UV samples and the edges joining each sample to its
/// [`UV_NEIGHBORS`] nearest others (ties to the lower index).
pub fn random_uv_samples(n: usize, rng: &mut impl Rng) -> (Vec<[f64; 2]>, Vec<(usize, usize)>) {
    let uv: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let mut edges = Vec::with_capacity(n * UV_NEIGHBORS);
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (i, a) in uv.iter().enumerate() {
        order.clear();
        order.extend(uv.iter().enumerate().filter(|&(j, _)| j != i).map(|(j, b)| {
            let (du, dv) = (a[0] - b[0], a[1] - b[1]);
            (du * du + dv * dv, j)
        }));
        order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        edges.extend(order.iter().take(UV_NEIGHBORS).map(|&(_, j)| (i.min(j), i.max(j))));
    }
    edges.sort_unstable();
    edges.dedup();
    (uv, edges)
}

/// Mean local loss over a set of patches with its gradient with respect to
/// the hypernetwork parameters.
#[derive(Debug, Clone)]
pub struct LocalGrad {
    pub loss: f64,
    /// Mean Chamfer term.
    pub chamfer: f64,
    /// Mean unweighted sum of squared edge lengths.
    pub edge: f64,
    pub grad: Vec<f64>,
    pub fingerprint: Fingerprint,
}

pub fn local_loss_grad(
    model: &ModelB,
    z: &Embedding,
    samples: &[PatchSample],
    lambda: f64,
) -> Result<LocalGrad> {
    if samples.is_empty() {
        return Err(Error::Size("no patches to evaluate".into()));
    }
    if z.dim() != model.latent_dim() {
        return Err(Error::Shape(format!(
            "embedding has dimension {}, model expects {}",
            z.dim(),
            model.latent_dim()
        )));
    }
    if samples.iter().any(|s| s.target.is_empty() || s.uv.is_empty()) {
        return Err(Error::Size("patch samples need UV samples and a nonempty target".into()));
    }
    let zin = Matrix::from_vec(1, z.dim(), z.values().to_vec())?;
    let hyper_trace = forward_traced(model.hyper_spec(), model.hyper(), &zin)?;
    let wvals = hyper_trace.output().data().to_vec();
    if wvals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("hypernetwork produced non-finite weights".into()));
    }
    let w = ParamVector::from_values(model.phi_spec(), wvals)?;

    let mut rows = Vec::new();
    let mut offsets = Vec::with_capacity(samples.len() + 1);
    offsets.push(0);
    for s in samples {
        rows.extend_from_slice(conditioned_batch(&s.uv, s.p)?.rows.data());
        offsets.push(offsets.last().expect("nonempty") + s.uv.len());
    }
    let total_rows = *offsets.last().expect("nonempty");
    let trace = forward_traced(model.phi_spec(), &w, &Matrix::from_vec(total_rows, 5, rows)?)?;
    let out = trace.output();

    let scale = 1.0 / samples.len() as f64;
    let per_patch: Vec<(f64, f64, Vec<Point3>, Vec<usize>)> = samples
        .par_iter()
        .enumerate()
        .map(|(j, s)| {
            let y: Vec<Point3> = (offsets[j]..offsets[j + 1])
                .map(|r| {
                    let q = out.row(r);
                    let q = Point3::new(q[0], q[1], q[2]);
                    if model.residual() {
                        s.p + q
                    } else {
                        q
                    }
                })
                .collect();
            let c = chamfer_with_grad(&y, &s.target);
            let mut grad = c.grad_a;
            let mut edge = 0.0;
            for &(a, b) in &s.edges {
                let d = y[a] - y[b];
                edge += d.norm_sq();
                grad[a] += d * (2.0 * lambda);
                grad[b] -= d * (2.0 * lambda);
            }
            let mut assign = c.a_to_b;
            assign.extend(c.b_to_a);
            (c.value, edge, grad, assign)
        })
        .collect();

    let mut fingerprint = Fingerprint::default();
    let (mut cd, mut edge) = (0.0, 0.0);
    let mut g = Matrix::zeros(total_rows, 3);
    for (j, (c, e, grad, assign)) in per_patch.iter().enumerate() {
        cd += c;
        edge += e;
        fingerprint.extend(assign.iter().copied());
        for (r, d) in (offsets[j]..offsets[j + 1]).zip(grad) {
            g.row_mut(r).copy_from_slice(&(*d * scale).to_array());
        }
    }
    let (cd, edge) = (cd * scale, edge * scale);
    let loss = cd + lambda * edge;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("local loss is {loss}")));
    }

    let mut dw = vec![0.0; w.len()];
    backward_traced(model.phi_spec(), &w, &trace, &g, &mut dw, false)?;
    trace.fingerprint(&mut fingerprint);
    let mut grad = vec![0.0; model.hyper().len()];
    let dw = Matrix::from_vec(1, dw.len(), dw)?;
    backward_traced(model.hyper_spec(), model.hyper(), &hyper_trace, &dw, &mut grad, false)?;
    hyper_trace.fingerprint(&mut fingerprint);
    Ok(LocalGrad { loss, chamfer: cd, edge, grad, fingerprint })
}

/// Central-difference check of [`local_loss_grad`] over the hypernetwork
/// parameters.
pub fn local_grad_check(
    model: &ModelB,
    z: &Embedding,
    samples: &[PatchSample],
    lambda: f64,
    count: usize,
    seed: u64,
) -> Result<GradCheck> {
    let g = local_loss_grad(model, z, samples, lambda)?;
    let mut probe = model.clone();
    let mut failure = None;
    let report = check_gradient(model.hyper().values(), &g.grad, count, seed, |x| {
        probe.hyper_mut().values_mut().copy_from_slice(x);
        match local_loss_grad(&probe, z, samples, lambda) {
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

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainBReport {
    /// Mean local loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub epoch_chamfer: Vec<f64>,
    /// Mean per-patch sum of squared edge lengths of each epoch.
    pub epoch_edge: Vec<f64>,
}

impl TrainBReport {
    pub fn initial_loss(&self) -> f64 {
        self.epoch_losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.epoch_losses.last().expect("at least one epoch")
    }
}

#[derive(Debug, Clone)]
pub struct TrainedB {
    pub model: ModelB,
    pub report: TrainBReport,
}

struct ShapeContext {
    z: Embedding,
    target_weights: ParamVector,
    index: SpatialIndex,
}

/// Draws the condition points, UV samples and targets of one step.
fn draw_patches(
    model_a: &ModelA,
    shape: &ShapeContext,
    cfg: &TrainBConfig,
    rng: &mut impl Rng,
) -> Result<Vec<PatchSample>> {
    let prior = sphere_prior_samples(cfg.patches, rng.random());
    let anchors = model_a.map_with(&shape.target_weights, &prior)?;
    anchors
        .into_iter()
        .map(|p| {
            if !p.is_finite() {
                return Err(Error::Numeric("Part A produced a non-finite point".into()));
            }
            let (uv, edges) = random_uv_samples(cfg.uv_samples, rng);
            let ids = shape.index.knn(p, cfg.k)?;
            let target = ids.into_iter().map(|i| shape.index.points()[i]).collect();
            Ok(PatchSample { p, uv, edges, target })
        })
        .collect()
}

/// Cosine annealing from `lr` at epoch 0 to `lr * fraction` at the last.
pub(crate) fn cosine_lr(lr: f64, fraction: f64, epoch: usize, epochs: usize) -> f64 {
    if epochs < 2 {
        return lr;
    }
    let t = epoch as f64 / (epochs - 1) as f64;
    lr * (fraction + (1.0 - fraction) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos()))
}

/// Trains `T_φ` against a frozen Part A model.
///
/// Each epoch takes one Adam step per training cloud (in a seeded random
/// order). A step draws condition points from the cloud's reconstruction,
/// fresh UV samples per patch and the `k` nearest neighbors of each
/// condition point as targets.
pub fn train_part_b(model_a: &ModelA, dataset: &CloudSet, cfg: &TrainBConfig) -> Result<TrainedB> {
    cfg.validate()?;
    if cfg.k > dataset.cloud_size() {
        return Err(Error::Size(format!(
            "k = {} exceeds the cloud size {}",
            cfg.k,
            dataset.cloud_size()
        )));
    }
    let mut model = ModelB::new(model_a.latent_dim(), &cfg.model, cfg.seed)?;
    let shapes: Vec<ShapeContext> = dataset
        .clouds()
        .iter()
        .map(|c| shape_context(model_a, c, cfg))
        .collect::<Result<_>>()?;

    let mut state = AdamState::new(model.hyper().len(), AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let mut order_rng = rng::stream(cfg.seed, 0x7b01);
    let mut sample_rng = rng::stream(cfg.seed, 0x7b02);
    let mut order: Vec<usize> = (0..shapes.len()).collect();
    let mut report = TrainBReport::default();
    for epoch in 0..cfg.epochs {
        state.config.lr = cosine_lr(cfg.lr, cfg.final_lr_fraction, epoch, cfg.epochs);
        order.shuffle(&mut order_rng);
        let (mut loss, mut cd, mut edge) = (0.0, 0.0, 0.0);
        for &i in &order {
            let shape = &shapes[i];
            let samples = draw_patches(model_a, shape, cfg, &mut sample_rng)?;
            let g = local_loss_grad(&model, &shape.z, &samples, cfg.lambda)
                .map_err(|e| Error::Numeric(format!("epoch {epoch}, shape {i}: {e}")))?;
            loss += g.loss;
            cd += g.chamfer;
            edge += g.edge;
            adam_step(model.hyper_mut().values_mut(), &g.grad, &mut state)?;
        }
        let n = shapes.len() as f64;
        report.epoch_losses.push(loss / n);
        report.epoch_chamfer.push(cd / n);
        report.epoch_edge.push(edge / n);
    }
    Ok(TrainedB { model, report })
}

/// Condition points drawn from a shape's reconstruction, for evaluation.
pub(crate) fn reconstruction_points(
    model_a: &ModelA,
    z: &Embedding,
    n: usize,
    seed: u64,
) -> Result<Vec<Point3>> {
    Ok(model_a.decode(z, n, seed)?.into_points())
}

/// Loss terms of a model on a fixed, seeded set of training-style patches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEval {
    pub loss: f64,
    pub chamfer: f64,
    /// Mean per-patch sum of squared edge lengths.
    pub edge: f64,
}

/// Evaluates `model_b` on `patches` condition points drawn from the
/// reconstruction of `cloud`, with UV samples, edges and targets built as in
/// training (`cfg` supplies `k`, `lambda`, `uv_samples` and the neighbor
/// source). The same seed gives the same patches for any `model_b`.
pub fn evaluate_local(
    model_a: &ModelA,
    model_b: &ModelB,
    cloud: &PointCloud,
    cfg: &TrainBConfig,
    patches: usize,
    seed: u64,
) -> Result<LocalEval> {
    let shape = shape_context(model_a, cloud, cfg)?;
    let cfg = TrainBConfig { patches, ..cfg.clone() };
    let samples = draw_patches(model_a, &shape, &cfg, &mut rng::stream(seed, 0x7b04))?;
    let g = local_loss_grad(model_b, &shape.z, &samples, cfg.lambda)?;
    Ok(LocalEval { loss: g.loss, chamfer: g.chamfer, edge: g.edge })
}

fn shape_context(model_a: &ModelA, cloud: &PointCloud, cfg: &TrainBConfig) -> Result<ShapeContext> {
    let z = model_a.encode(cloud);
    let target_weights = model_a.target_weights(&z)?;
    let index = match cfg.neighbors {
        NeighborSource::Input => SpatialIndex::new(cloud),
        NeighborSource::Reconstruction => {
            let seed = rng::stream(cfg.seed, 0x7b03).random();
            SpatialIndex::new(&model_a.decode(&z, cloud.len(), seed)?)
        }
    };
    Ok(ShapeContext { z, target_weights, index })
}
