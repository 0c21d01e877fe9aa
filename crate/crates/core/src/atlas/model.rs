use crate::geom::{edge_sq_sum, uv_grid, Point3, PointCloud, SpatialIndex, TriMesh};
use crate::hypermodel::Embedding;
use crate::metrics::chamfer;
use crate::nn::{forward, init_params, Activation, Matrix, MlpSpec, ParamVector};
use crate::{Error, Result};

/// Input rows `(u, v, px, py, pz)` sharing one condition point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedBatch {
    pub rows: Matrix,
    pub p: Point3,
}

pub fn conditioned_batch(uv: &[[f64; 2]], p: Point3) -> Result<ConditionedBatch> {
    let mut data = Vec::with_capacity(5 * uv.len());
    for &[u, v] in uv {
        if !((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)) {
            return Err(Error::Parameter(format!("uv sample ({u}, {v}) outside [0, 1]^2")));
        }
        data.extend_from_slice(&[u, v, p.x, p.y, p.z]);
    }
    Ok(ConditionedBatch { rows: Matrix::from_vec(uv.len(), 5, data)?, p })
}

/// The `k` points of `cloud` nearest to its member `p_index`, nearest
/// first (so `p` itself leads).
pub fn neighborhood(cloud: &PointCloud, p_index: usize, k: usize) -> Result<PointCloud> {
    let p = *cloud.points().get(p_index).ok_or_else(|| {
        Error::Parameter(format!("point index {p_index} outside cloud of {}", cloud.len()))
    })?;
    let index = SpatialIndex::new(cloud);
    let ids = index.knn(p, k)?;
    PointCloud::new(ids.into_iter().map(|i| cloud.points()[i]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBConfig {
    /// Hidden widths of the hypernetwork producing φ's weights.
    pub hyper_hidden: Vec<usize>,
    pub hyper_activation: Activation,
    /// Hidden widths of φ (input 5, output 3).
    pub phi_hidden: Vec<usize>,
    pub phi_activation: Activation,
    /// Add the condition point to φ's output, so the network learns an
    /// offset from `p` rather than an absolute position.
    pub residual: bool,
}

impl Default for ModelBConfig {
    fn default() -> Self {
        Self {
            hyper_hidden: vec![256],
            hyper_activation: Activation::Relu,
            phi_hidden: vec![64, 64],
            phi_activation: Activation::Relu,
            residual: true,
        }
    }
}

/// Hypernetwork `T_φ` and the layout of the patch network φ.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelB {
    hyper_spec: MlpSpec,
    hyper: ParamVector,
    phi_spec: MlpSpec,
    residual: bool,
}

impl ModelB {
    pub fn new(latent_dim: usize, cfg: &ModelBConfig, seed: u64) -> Result<Self> {
        let mut phi = vec![5];
        phi.extend_from_slice(&cfg.phi_hidden);
        phi.push(3);
        let phi_spec = MlpSpec::new(phi, cfg.phi_activation)?;
        let mut hyper = vec![latent_dim];
        hyper.extend_from_slice(&cfg.hyper_hidden);
        hyper.push(phi_spec.param_count());
        let hyper_spec = MlpSpec::new(hyper, cfg.hyper_activation)?;
        let params = init_params(&hyper_spec, seed);
        Self::from_parts(hyper_spec, params, phi_spec, cfg.residual)
    }

    pub fn from_parts(
        hyper_spec: MlpSpec,
        hyper: ParamVector,
        phi_spec: MlpSpec,
        residual: bool,
    ) -> Result<Self> {
        if phi_spec.input_width() != 5 || phi_spec.output_width() != 3 {
            return Err(Error::Shape("patch network must map R^5 to R^3".into()));
        }
        if hyper_spec.output_width() != phi_spec.param_count() {
            return Err(Error::Shape(format!(
                "hypernetwork emits {} values, patch network has {} parameters",
                hyper_spec.output_width(),
                phi_spec.param_count()
            )));
        }
        let hyper = ParamVector::from_values(&hyper_spec, hyper.into_values())?;
        Ok(Self { hyper_spec, hyper, phi_spec, residual })
    }

    pub fn latent_dim(&self) -> usize {
        self.hyper_spec.input_width()
    }

    pub fn hyper_spec(&self) -> &MlpSpec {
        &self.hyper_spec
    }

    pub fn hyper(&self) -> &ParamVector {
        &self.hyper
    }

    pub fn hyper_mut(&mut self) -> &mut ParamVector {
        &mut self.hyper
    }

    pub fn phi_spec(&self) -> &MlpSpec {
        &self.phi_spec
    }

    pub fn residual(&self) -> bool {
        self.residual
    }

    /// Weights of φ for the shape `z`.
    pub fn phi_weights(&self, z: &Embedding) -> Result<ParamVector> {
        if z.dim() != self.latent_dim() {
            return Err(Error::Shape(format!(
                "embedding has dimension {}, model expects {}",
                z.dim(),
                self.latent_dim()
            )));
        }
        let input = Matrix::from_vec(1, z.dim(), z.values().to_vec())?;
        let w = forward(&self.hyper_spec, &self.hyper, &input)?.into_data();
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("hypernetwork produced non-finite weights".into()));
        }
        ParamVector::from_values(&self.phi_spec, w)
    }

    /// φ over a conditioned batch.
    pub fn eval_phi(&self, weights: &ParamVector, batch: &ConditionedBatch) -> Result<Vec<Point3>> {
        let y = forward(&self.phi_spec, weights, &batch.rows)?;
        Ok(y.iter_rows()
            .map(|r| {
                let q = Point3::new(r[0], r[1], r[2]);
                if self.residual {
                    batch.p + q
                } else {
                    q
                }
            })
            .collect())
    }
}

/// φ evaluated on a UV grid around one condition point.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub mesh: TriMesh,
    pub p: Point3,
    pub resolution: usize,
}

pub fn phi_patch(model: &ModelB, z: &Embedding, p: Point3, m: usize) -> Result<Patch> {
    let w = model.phi_weights(z)?;
    patch_with(model, &w, p, m)
}

pub(crate) fn patch_with(model: &ModelB, w: &ParamVector, p: Point3, m: usize) -> Result<Patch> {
    let grid = uv_grid(m)?;
    let vertices = model.eval_phi(w, &conditioned_batch(grid.vertices(), p)?)?;
    let mesh = TriMesh::new(vertices, grid.triangles().to_vec())?;
    Ok(Patch { mesh, p, resolution: m })
}

/// `chamfer(patch vertices, target) + lambda * edge_sq_sum(patch)`.
pub fn local_loss(patch: &Patch, target: &PointCloud, lambda: f64) -> Result<f64> {
    let vertices = PointCloud::new(patch.mesh.vertices().to_vec())?;
    let cd = chamfer(&vertices, target)?;
    if lambda == 0.0 {
        return Ok(cd);
    }
    Ok(cd + lambda * edge_sq_sum(&patch.mesh))
}
