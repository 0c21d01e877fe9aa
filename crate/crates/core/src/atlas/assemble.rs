use std::collections::HashMap;

use rayon::prelude::*;

use super::model::patch_with;
use super::train::reconstruction_points;
use super::{conditioned_batch, ModelB, Patch};
use crate::geom::{quad_sphere, weld_vertices, Point3, SpatialIndex, TriMesh};
use crate::hypermodel::{Embedding, ModelA};
use crate::nn::ParamVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AssemblyMode {
    /// Refine a quad sphere through φ with corner-blended conditioning.
    #[default]
    Closed,
    /// Independent patches at reconstructed points, then welded.
    Soup,
}

impl AssemblyMode {
    pub fn name(self) -> &'static str {
        match self {
            AssemblyMode::Closed => "closed",
            AssemblyMode::Soup => "soup",
        }
    }
}

impl std::str::FromStr for AssemblyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(AssemblyMode::Closed),
            "soup" => Ok(AssemblyMode::Soup),
            _ => Err(Error::Parameter(format!("unknown mesh mode '{s}' (expected closed or soup)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembleConfig {
    pub mode: AssemblyMode,
    /// Quad sphere resolution (closed mode).
    pub sphere_resolution: usize,
    /// UV grid resolution per quad or patch.
    pub patch_resolution: usize,
    /// Number of patches (soup mode).
    pub patches: usize,
    /// Weld tolerance (soup mode); 0 leaves the soup unwelded.
    pub weld_epsilon: f64,
    pub seed: u64,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        Self {
            mode: AssemblyMode::Closed,
            sphere_resolution: 9,
            patch_resolution: 4,
            patches: 64,
            weld_epsilon: 0.0,
            seed: 0,
        }
    }
}

pub fn assemble_mesh(
    model_a: &ModelA,
    model_b: &ModelB,
    z: &Embedding,
    cfg: &AssembleConfig,
) -> Result<TriMesh> {
    match cfg.mode {
        AssemblyMode::Closed => {
            closed_mesh(model_a, model_b, z, cfg.sphere_resolution, cfg.patch_resolution)
        }
        AssemblyMode::Soup => {
            let patches: Vec<TriMesh> =
                soup_patches(model_a, model_b, z, cfg)?.into_iter().map(|p| p.mesh).collect();
            weld_if(TriMesh::merge(&patches), cfg.weld_epsilon)
        }
    }
}

/// The individual patches a soup-mode assembly is made of, in condition
/// point order.
pub fn soup_patches(
    model_a: &ModelA,
    model_b: &ModelB,
    z: &Embedding,
    cfg: &AssembleConfig,
) -> Result<Vec<Patch>> {
    if cfg.patches == 0 {
        return Err(Error::Parameter("soup mode needs at least one patch".into()));
    }
    let w = model_b.phi_weights(z)?;
    let points = reconstruction_points(model_a, z, cfg.patches, cfg.seed)?;
    points.par_iter().map(|&p| patch_with(model_b, &w, p, cfg.patch_resolution)).collect()
}

fn weld_if(mesh: TriMesh, epsilon: f64) -> Result<TriMesh> {
    if epsilon > 0.0 {
        weld_vertices(&mesh, epsilon)
    } else {
        Ok(mesh)
    }
}

/// UV coordinate for a sample at offset `(du, dv)` from a quad corner.
///
/// The corner itself maps to the patch center. Folding the offset by
/// `max`/`min` makes the value independent of the quad's orientation, so
/// two quads sharing an edge feed φ identical inputs along it.
fn corner_uv(du: f64, dv: f64) -> [f64; 2] {
    let (hi, lo) = if du >= dv { (du, dv) } else { (dv, du) };
    [0.5 + 0.5 * hi, 0.5 + 0.5 * lo]
}

/// Blended φ values on the `m x m` grid of one quad, row-major with `i`
/// running from corner 0 towards corner 1.
fn blend_quad(
    model: &ModelB,
    w: &ParamVector,
    anchors: &[Point3],
    quad: &[usize; 4],
    m: usize,
) -> Result<Vec<Point3>> {
    let step = (m - 1) as f64;
    let local: Vec<(f64, f64)> = (0..m)
        .flat_map(|j| (0..m).map(move |i| (i as f64 / step, j as f64 / step)))
        .collect();
    // Quad corners [c00, c10, c11, c01] in local coordinates.
    let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    let mut out = vec![Point3::ZERO; local.len()];
    for (c, &(cs, ct)) in corners.iter().enumerate() {
        let uv: Vec<[f64; 2]> =
            local.iter().map(|&(s, t)| corner_uv((s - cs).abs(), (t - ct).abs())).collect();
        let values = model.eval_phi(w, &conditioned_batch(&uv, anchors[quad[c]])?)?;
        for ((o, v), &(s, t)) in out.iter_mut().zip(values).zip(&local) {
            let ws = if cs == 0.0 { 1.0 - s } else { s };
            let wt = if ct == 0.0 { 1.0 - t } else { t };
            *o += v * (ws * wt);
        }
    }
    Ok(out)
}

/// Refines every quad of the quad sphere with blended φ evaluations.
///
/// Vertices on sphere corners, sphere edges and quad interiors get one
/// global index each; a shared vertex takes the value computed by the first
/// quad that reaches it. The output therefore has exactly the topology of a
/// subdivided sphere whatever the networks compute.
fn closed_mesh(
    model_a: &ModelA,
    model_b: &ModelB,
    z: &Embedding,
    r: usize,
    m: usize,
) -> Result<TriMesh> {
    if m < 2 {
        return Err(Error::Parameter(format!("patch resolution must be >= 2, got {m}")));
    }
    let sphere = quad_sphere(r)?;
    let anchors = model_a.map_points(z, sphere.mesh.vertices())?;
    let w = model_b.phi_weights(z)?;
    let grids: Vec<Vec<Point3>> = sphere
        .quads
        .par_iter()
        .map(|q| blend_quad(model_b, &w, &anchors, q, m))
        .collect::<Result<_>>()?;

    let corner_count = anchors.len();
    let inner = m - 2;
    let last = m - 1;
    let mut next = corner_count;
    let mut edge_base: HashMap<(usize, usize), usize> = HashMap::new();
    for q in &sphere.quads {
        for e in 0..4 {
            let (a, b) = (q[e], q[(e + 1) % 4]);
            edge_base.entry((a.min(b), a.max(b))).or_insert_with(|| {
                next += inner;
                next - inner
            });
        }
    }
    // Samples along a sphere edge are stored from its lower corner index.
    let edge_id = |a: usize, b: usize, k: usize| -> usize {
        let base = edge_base[&(a.min(b), a.max(b))];
        if a < b {
            base + k - 1
        } else {
            base + (last - k) - 1
        }
    };

    let mut positions: Vec<Option<Point3>> = vec![None; next + sphere.quads.len() * inner * inner];
    let mut faces = Vec::with_capacity(sphere.quads.len() * 2 * last * last);
    let mut ids = vec![0; m * m];
    for (qi, (q, grid)) in sphere.quads.iter().zip(&grids).enumerate() {
        let interior = next + qi * inner * inner;
        for j in 0..m {
            for i in 0..m {
                ids[j * m + i] = match (i == 0 || i == last, j == 0 || j == last) {
                    (true, true) => match (i == 0, j == 0) {
                        (true, true) => q[0],
                        (false, true) => q[1],
                        (false, false) => q[2],
                        (true, false) => q[3],
                    },
                    (false, true) => {
                        if j == 0 {
                            edge_id(q[0], q[1], i)
                        } else {
                            edge_id(q[3], q[2], i)
                        }
                    }
                    (true, false) => {
                        if i == 0 {
                            edge_id(q[0], q[3], j)
                        } else {
                            edge_id(q[1], q[2], j)
                        }
                    }
                    (false, false) => interior + (j - 1) * inner + (i - 1),
                };
            }
        }
        for (&id, &v) in ids.iter().zip(grid) {
            positions[id].get_or_insert(v);
        }
        for j in 0..last {
            for i in 0..last {
                let v00 = ids[j * m + i];
                let v10 = ids[j * m + i + 1];
                let v11 = ids[(j + 1) * m + i + 1];
                let v01 = ids[(j + 1) * m + i];
                faces.push([v00, v10, v11]);
                faces.push([v00, v11, v01]);
            }
        }
    }
    let vertices = positions
        .into_iter()
        .map(|p| p.ok_or_else(|| Error::State("closed assembly left a vertex unset".into())))
        .collect::<Result<_>>()?;
    TriMesh::new(vertices, faces)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FillConfig {
    /// Largest allowed distance from a reference point to the mesh.
    pub tau: f64,
    pub max_patches: usize,
    pub patch_resolution: usize,
    /// Weld tolerance after each added patch; 0 skips welding.
    pub weld_epsilon: f64,
    /// Reconstructed points used to locate gaps.
    pub reference_points: usize,
    pub seed: u64,
}

impl Default for FillConfig {
    fn default() -> Self {
        Self {
            tau: 0.05,
            max_patches: 32,
            patch_resolution: 4,
            weld_epsilon: 0.0,
            reference_points: 2048,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FillReport {
    pub mesh: TriMesh,
    /// Condition points of the added patches, in insertion order.
    pub added: Vec<Point3>,
    /// Largest reference-to-vertex distance of the returned mesh.
    pub max_gap: f64,
}

/// Index and distance of the reference point farthest from every vertex
/// (lowest index on ties).
fn widest_gap(mesh: &TriMesh, references: &[Point3]) -> (usize, f64) {
    let index = SpatialIndex::with_leaf_size(mesh.vertices(), crate::geom::DEFAULT_LEAF_SIZE);
    let dists: Vec<f64> = references
        .par_iter()
        .map(|&r| index.nearest(r).map_or(f64::INFINITY, |(_, d)| d.sqrt()))
        .collect();
    dists
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best })
}

/// Adds patches at uncovered reconstructed points until every reference
/// point is within `tau` of a mesh vertex or the budget is spent.
pub fn adaptive_fill(
    mesh: &TriMesh,
    model_a: &ModelA,
    model_b: &ModelB,
    z: &Embedding,
    cfg: &FillConfig,
) -> Result<FillReport> {
    if !(cfg.tau.is_finite() && cfg.tau >= 0.0) {
        return Err(Error::Parameter(format!("gap tolerance must be >= 0, got {}", cfg.tau)));
    }
    if cfg.reference_points == 0 {
        return Err(Error::Parameter("need at least one reference point".into()));
    }
    let references = reconstruction_points(model_a, z, cfg.reference_points, cfg.seed)?;
    let w = model_b.phi_weights(z)?;
    let mut mesh = mesh.clone();
    let mut added = Vec::new();
    loop {
        let (worst, gap) = widest_gap(&mesh, &references);
        if gap <= cfg.tau || added.len() >= cfg.max_patches {
            return Ok(FillReport { mesh, added, max_gap: gap });
        }
        let p = references[worst];
        let patch = patch_with(model_b, &w, p, cfg.patch_resolution)?;
        mesh = weld_if(TriMesh::merge(&[mesh, patch.mesh]), cfg.weld_epsilon)?;
        added.push(p);
    }
}
