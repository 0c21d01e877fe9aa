use rand_distr::{Distribution, StandardNormal};

use super::Embedding;
use crate::geom::{unit_sphere_quadgrid, Point3, PointCloud, TriMesh};
use crate::nn::{forward, forward_traced, init_params, Activation, Matrix, MlpSpec, ParamVector, Trace};
use crate::{rng, Error, Result};

/// Layer widths of the three Part A networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelAConfig {
    pub latent_dim: usize,
    /// Hidden widths of the per-point encoder (input 3, output `latent_dim`).
    pub encoder_hidden: Vec<usize>,
    /// Hidden widths of the hypernetwork.
    pub hyper_hidden: Vec<usize>,
    /// Hidden widths of the target network (input 3, output 3).
    pub target_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for ModelAConfig {
    fn default() -> Self {
        Self {
            latent_dim: 128,
            encoder_hidden: vec![64, 128],
            hyper_hidden: vec![256],
            target_hidden: vec![64, 64, 64],
            activation: Activation::Relu,
        }
    }
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(input);
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

/// Encoder, hypernetwork and target-network layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelA {
    encoder_spec: MlpSpec,
    encoder: ParamVector,
    hyper_spec: MlpSpec,
    hyper: ParamVector,
    target_spec: MlpSpec,
}

impl ModelA {
    pub fn new(cfg: &ModelAConfig, seed: u64) -> Result<Self> {
        let target_spec = MlpSpec::new(widths(3, &cfg.target_hidden, 3), cfg.activation)?;
        let encoder_spec =
            MlpSpec::new(widths(3, &cfg.encoder_hidden, cfg.latent_dim), cfg.activation)?;
        let hyper_spec = MlpSpec::new(
            widths(cfg.latent_dim, &cfg.hyper_hidden, target_spec.param_count()),
            cfg.activation,
        )?;
        let encoder = init_params(&encoder_spec, seed);
        let hyper = init_params(&hyper_spec, seed.wrapping_add(1));
        Self::from_parts(encoder_spec, encoder, hyper_spec, hyper, target_spec)
    }

    pub fn from_parts(
        encoder_spec: MlpSpec,
        encoder: ParamVector,
        hyper_spec: MlpSpec,
        hyper: ParamVector,
        target_spec: MlpSpec,
    ) -> Result<Self> {
        if encoder_spec.input_width() != 3 || target_spec.input_width() != 3 {
            return Err(Error::Shape("encoder and target networks must take 3D points".into()));
        }
        if target_spec.output_width() != 3 {
            return Err(Error::Shape("target network must output 3D points".into()));
        }
        if hyper_spec.input_width() != encoder_spec.output_width() {
            return Err(Error::Shape(format!(
                "hypernetwork input {} differs from latent size {}",
                hyper_spec.input_width(),
                encoder_spec.output_width()
            )));
        }
        if hyper_spec.output_width() != target_spec.param_count() {
            return Err(Error::Shape(format!(
                "hypernetwork emits {} values, target network has {} parameters",
                hyper_spec.output_width(),
                target_spec.param_count()
            )));
        }
        let encoder = ParamVector::from_values(&encoder_spec, encoder.into_values())?;
        let hyper = ParamVector::from_values(&hyper_spec, hyper.into_values())?;
        Ok(Self { encoder_spec, encoder, hyper_spec, hyper, target_spec })
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder_spec.output_width()
    }

    pub fn encoder_spec(&self) -> &MlpSpec {
        &self.encoder_spec
    }

    pub fn encoder(&self) -> &ParamVector {
        &self.encoder
    }

    pub fn encoder_mut(&mut self) -> &mut ParamVector {
        &mut self.encoder
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

    pub fn target_spec(&self) -> &MlpSpec {
        &self.target_spec
    }

    /// Encoder trace plus, per latent coordinate, the point row holding the
    /// maximum (lowest row on ties).
    pub(crate) fn encode_traced(&self, points: &[Point3]) -> (Vec<f64>, Trace, Vec<usize>) {
        let trace = forward_traced(&self.encoder_spec, &self.encoder, &points_matrix(points))
            .expect("encoder spec validated at construction");
        let out = trace.output();
        let mut z = out.row(0).to_vec();
        let mut argmax = vec![0; z.len()];
        for r in 1..out.rows() {
            for (c, &v) in out.row(r).iter().enumerate() {
                if v > z[c] {
                    z[c] = v;
                    argmax[c] = r;
                }
            }
        }
        (z, trace, argmax)
    }

    /// Coordinatewise max over the per-point features.
    pub fn encode(&self, cloud: &PointCloud) -> Embedding {
        let (z, _, _) = self.encode_traced(cloud.points());
        Embedding::new(z).expect("finite input gives a finite embedding")
    }

    fn check_latent(&self, z: &Embedding) -> Result<()> {
        if z.dim() != self.latent_dim() {
            return Err(Error::Shape(format!(
                "embedding has dimension {}, model expects {}",
                z.dim(),
                self.latent_dim()
            )));
        }
        Ok(())
    }

    /// Target-network weights for `z`.
    pub fn target_weights(&self, z: &Embedding) -> Result<ParamVector> {
        self.check_latent(z)?;
        let w = forward(&self.hyper_spec, &self.hyper, &Matrix::from_vec(1, z.dim(), z.values().to_vec())?)?;
        let values = w.into_data();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("hypernetwork produced non-finite weights".into()));
        }
        ParamVector::from_values(&self.target_spec, values)
    }

    /// Applies the target network for `z` to arbitrary points.
    pub fn map_points(&self, z: &Embedding, points: &[Point3]) -> Result<Vec<Point3>> {
        let w = self.target_weights(z)?;
        self.map_with(&w, points)
    }

    pub(crate) fn map_with(&self, weights: &ParamVector, points: &[Point3]) -> Result<Vec<Point3>> {
        if points.is_empty() {
            return Ok(Vec::new());
        }
        let y = forward(&self.target_spec, weights, &points_matrix(points))?;
        Ok(matrix_points(&y))
    }

    /// `n` uniform sphere samples mapped through the target network for `z`.
    pub fn decode(&self, z: &Embedding, n: usize, seed: u64) -> Result<PointCloud> {
        if n == 0 {
            return Err(Error::Size("cannot decode zero points".into()));
        }
        PointCloud::new(self.map_points(z, &sphere_prior_samples(n, seed))?)
    }

    pub fn reconstruct(&self, cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
        self.decode(&self.encode(cloud), n, seed)
    }

    /// The quad sphere of resolution `m` with its vertices mapped through
    /// the target network. Connectivity is copied, so the result is closed.
    pub fn sphere_mesh(&self, z: &Embedding, m: usize) -> Result<TriMesh> {
        let sphere = unit_sphere_quadgrid(m)?;
        let vertices = self.map_points(z, sphere.vertices())?;
        sphere.with_vertices(vertices)
    }
}

pub(crate) fn points_matrix(points: &[Point3]) -> Matrix {
    let data = points.iter().flat_map(|p| p.to_array()).collect();
    Matrix::from_vec(points.len(), 3, data).expect("3 values per point")
}

pub(crate) fn matrix_points(m: &Matrix) -> Vec<Point3> {
    m.iter_rows().map(|r| Point3::new(r[0], r[1], r[2])).collect()
}

/// `n` points uniform on the unit sphere.
pub fn sphere_prior_samples(n: usize, seed: u64) -> Vec<Point3> {
    let mut rng = rng::stream(seed, 0x5e4e);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let g = |r: &mut _| -> f64 { StandardNormal.sample(r) };
        let p = Point3::new(g(&mut rng), g(&mut rng), g(&mut rng));
        if let Some(u) = p.normalized().filter(|_| p.norm() > 1e-12) {
            out.push(u);
        }
    }
    out
}
