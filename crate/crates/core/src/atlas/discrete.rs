use rand::Rng;
use rayon::prelude::*;

use crate::geom::{uv_grid, Point3, PointCloud, TriMesh};
use crate::metrics::chamfer_with_grad;
use crate::nn::{
    adam_step, backward_traced, forward, forward_traced, init_params, Activation, AdamConfig,
    AdamState, Matrix, MlpSpec, ParamVector,
};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteAtlasConfig {
    pub k_patches: usize,
    /// UV grid resolution of the emitted patch meshes.
    pub patch_resolution: usize,
    /// Random UV samples per patch and step.
    pub samples_per_patch: usize,
    pub epochs: usize,
    pub lr: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for DiscreteAtlasConfig {
    fn default() -> Self {
        Self {
            k_patches: 25,
            patch_resolution: 8,
            samples_per_patch: 64,
            epochs: 500,
            lr: 1e-3,
            hidden: vec![64, 64],
            activation: Activation::Relu,
            seed: 0,
        }
    }
}

/// A fixed set of independent, unconditioned parameterizations
/// `φ_i: [0, 1]^2 -> R^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteAtlasBaseline {
    pub spec: MlpSpec,
    pub patches: Vec<ParamVector>,
}

impl DiscreteAtlasBaseline {
    pub fn new(k_patches: usize, hidden: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if k_patches == 0 {
            return Err(Error::Parameter("a discrete atlas needs at least one patch".into()));
        }
        let mut widths = vec![2];
        widths.extend_from_slice(hidden);
        widths.push(3);
        let spec = MlpSpec::new(widths, activation)?;
        let patches = (0..k_patches as u64)
            .map(|i| init_params(&spec, seed.wrapping_add(i.wrapping_mul(0x9e37_79b9))))
            .collect();
        Ok(Self { spec, patches })
    }

    /// Each patch evaluated on an `m x m` UV grid.
    pub fn patch_meshes(&self, m: usize) -> Result<Vec<TriMesh>> {
        let grid = uv_grid(m)?;
        let uv = uv_matrix(grid.vertices());
        self.patches
            .iter()
            .map(|p| {
                let y = forward(&self.spec, p, &uv)?;
                TriMesh::new(rows_to_points(&y), grid.triangles().to_vec())
            })
            .collect()
    }

    /// Union of the patch meshes, unwelded.
    pub fn soup(&self, m: usize) -> Result<TriMesh> {
        Ok(TriMesh::merge(&self.patch_meshes(m)?))
    }
}

fn uv_matrix(uv: &[[f64; 2]]) -> Matrix {
    Matrix::from_vec(uv.len(), 2, uv.iter().flatten().copied().collect()).expect("2 per row")
}

fn rows_to_points(m: &Matrix) -> Vec<Point3> {
    m.iter_rows().map(|r| Point3::new(r[0], r[1], r[2])).collect()
}

#[derive(Debug, Clone)]
pub struct DiscreteAtlasFit {
    pub baseline: DiscreteAtlasBaseline,
    pub soup: TriMesh,
    /// Global Chamfer loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains the patches jointly on the Chamfer distance between the union of
/// their samples and `cloud`, one Adam step per epoch.
pub fn discrete_atlas(cloud: &PointCloud, cfg: &DiscreteAtlasConfig) -> Result<DiscreteAtlasFit> {
    if cfg.epochs == 0 || cfg.samples_per_patch == 0 || !(cfg.lr.is_finite() && cfg.lr > 0.0) {
        return Err(Error::Parameter("epochs, samples and learning rate must be > 0".into()));
    }
    let mut baseline = DiscreteAtlasBaseline::new(cfg.k_patches, &cfg.hidden, cfg.activation, cfg.seed)?;
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
    let mut states: Vec<AdamState> =
        baseline.patches.iter().map(|p| AdamState::new(p.len(), adam)).collect();
    let mut sample_rng = rng::stream(cfg.seed, 0xda01);
    let n = cfg.samples_per_patch;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let inputs: Vec<Matrix> = (0..baseline.patches.len())
            .map(|_| {
                let uv: Vec<[f64; 2]> =
                    (0..n).map(|_| [sample_rng.random::<f64>(), sample_rng.random::<f64>()]).collect();
                uv_matrix(&uv)
            })
            .collect();
        let traces = baseline
            .patches
            .par_iter()
            .zip(&inputs)
            .map(|(p, x)| forward_traced(&baseline.spec, p, x))
            .collect::<Result<Vec<_>>>()?;
        let union: Vec<Point3> = traces.iter().flat_map(|t| rows_to_points(t.output())).collect();
        let c = chamfer_with_grad(&union, cloud.points());
        if !c.value.is_finite() {
            return Err(Error::Numeric(format!("epoch {epoch}: chamfer loss is {}", c.value)));
        }
        epoch_losses.push(c.value);
        let grads = baseline
            .patches
            .par_iter()
            .zip(&traces)
            .enumerate()
            .map(|(i, (p, t))| {
                let g: Vec<f64> = c.grad_a[i * n..(i + 1) * n].iter().flat_map(|d| d.to_array()).collect();
                let mut grad = vec![0.0; p.len()];
                backward_traced(&baseline.spec, p, t, &Matrix::from_vec(n, 3, g)?, &mut grad, false)?;
                Ok(grad)
            })
            .collect::<Result<Vec<_>>>()?;
        for ((p, g), s) in baseline.patches.iter_mut().zip(&grads).zip(&mut states) {
            adam_step(p.values_mut(), g, s)?;
        }
    }
    let soup = baseline.soup(cfg.patch_resolution)?;
    Ok(DiscreteAtlasFit { baseline, soup, epoch_losses })
}
