//! Watertightness as the fraction of exterior rays that cross a mesh an even
//! number of times.
//!
//! A closed surface separates space, so a ray that starts outside the mesh
//! and escapes to infinity enters and leaves it equally often. Holes and
//! unstitched patch borders break that parity.

mod bvh;
mod ray;

pub use bvh::{Aabb, Bvh, DEFAULT_LEAF_CAPACITY};
pub use ray::{intersect_triangle, Hit, Ray, BARYCENTRIC_EPS};

use rand::Rng;
use rayon::prelude::*;

use crate::geom::{sample_surface, Point3, TriMesh};
use crate::{rng, Error, Result};

/// Where a test ray starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayOrigin {
    /// Outside the bounding sphere, on the line through the sample point.
    Exterior,
    /// On the sample point itself; kept for comparison only.
    Surface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WtConfig {
    pub rays: usize,
    pub seed: u64,
    /// Largest rotation (radians) applied when re-casting a degenerate ray.
    pub perturbation: f64,
    /// Exterior origins sit this many bounding radii beyond the sample point.
    pub origin_offset: f64,
    pub max_retries: usize,
    pub origin: RayOrigin,
}

impl Default for WtConfig {
    fn default() -> Self {
        Self {
            rays: 100_000,
            seed: 0,
            perturbation: 1e-4,
            origin_offset: 2.0,
            max_retries: 8,
            origin: RayOrigin::Exterior,
        }
    }
}

/// Crossing count of one ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Crossings {
    pub count: usize,
    /// A hit landed on (or numerically next to) an edge or vertex.
    pub degenerate: bool,
}

/// Outcome for a single sampled ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayRecord {
    pub sample: Point3,
    pub face: usize,
    pub crossings: usize,
    /// Casts needed; more than one means the first cast was degenerate.
    pub attempts: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WtReport {
    pub ratio: f64,
    pub rays: usize,
    pub passed: usize,
    /// Rays whose first cast was degenerate.
    pub degenerate_rays: usize,
    /// Rays still degenerate after every retry; counted as failing.
    pub unresolved_rays: usize,
    pub records: Vec<RayRecord>,
}

/// Number of triangles whose interior the ray crosses, using the hierarchy.
pub fn ray_crossings(bvh: &Bvh, mesh: &TriMesh, ray: &Ray, t_min: f64) -> Crossings {
    let mut out = Crossings::default();
    bvh.visit(ray, |face| match intersect_triangle(ray, mesh.triangle(face)) {
        Hit::Crossing(t) if t > t_min => out.count += 1,
        Hit::Degenerate(t) if t > t_min => out.degenerate = true,
        _ => {}
    });
    out
}

/// Reference crossing count testing every triangle.
pub fn ray_crossings_brute_force(mesh: &TriMesh, ray: &Ray, t_min: f64) -> Crossings {
    let mut out = Crossings::default();
    for face in 0..mesh.faces().len() {
        match intersect_triangle(ray, mesh.triangle(face)) {
            Hit::Crossing(t) if t > t_min => out.count += 1,
            Hit::Degenerate(t) if t > t_min => out.degenerate = true,
            _ => {}
        }
    }
    out
}

/// Rotates `dir` by an angle in `(0, max_angle]` about a random axis
/// orthogonal to it.
fn perturb(dir: Point3, max_angle: f64, rng: &mut impl Rng) -> Point3 {
    let helper = if dir.x.abs() < 0.9 { Point3::new(1.0, 0.0, 0.0) } else { Point3::new(0.0, 1.0, 0.0) };
    let e1 = dir.cross(helper).normalized().expect("helper is not parallel");
    let e2 = dir.cross(e1);
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    let angle = max_angle * (1.0 - rng.random::<f64>());
    let axis = e1 * phi.cos() + e2 * phi.sin();
    // Rodrigues with axis orthogonal to dir.
    let rotated = dir * angle.cos() + axis.cross(dir) * angle.sin();
    rotated.normalized().expect("rotation preserves length")
}

/// Ratio of surface-sampled rays that pass the parity test.
pub fn watertightness(mesh: &TriMesh, cfg: &WtConfig) -> Result<WtReport> {
    watertightness_with(mesh, cfg, false)
}

/// Like [`watertightness`], optionally keeping a record for every ray.
pub fn watertightness_with(mesh: &TriMesh, cfg: &WtConfig, keep_records: bool) -> Result<WtReport> {
    let bvh = Bvh::build(mesh, DEFAULT_LEAF_CAPACITY);
    parity_ratio(mesh, cfg, keep_records, |ray, t_min| ray_crossings(&bvh, mesh, ray, t_min))
}

/// [`watertightness`] testing every triangle for every ray. Slow; exists to
/// validate the hierarchy.
pub fn watertightness_brute_force(mesh: &TriMesh, cfg: &WtConfig) -> Result<WtReport> {
    parity_ratio(mesh, cfg, false, |ray, t_min| ray_crossings_brute_force(mesh, ray, t_min))
}

fn parity_ratio(
    mesh: &TriMesh,
    cfg: &WtConfig,
    keep_records: bool,
    count: impl Fn(&Ray, f64) -> Crossings + Sync,
) -> Result<WtReport> {
    if cfg.rays == 0 {
        return Err(Error::Parameter("ray count must be >= 1".into()));
    }
    if mesh.faces().is_empty() {
        return Err(Error::Geometry("mesh has no faces".into()));
    }
    let samples = sample_surface(mesh, cfg.rays, cfg.seed)?;
    let (center, radius) = mesh.bounding_sphere();
    let t_min = match cfg.origin {
        RayOrigin::Exterior => 0.0,
        RayOrigin::Surface => 1e-9 * radius.max(f64::MIN_POSITIVE),
    };

    let records: Vec<RayRecord> = (0..cfg.rays)
        .into_par_iter()
        .with_min_len(512)
        .map(|i| {
            let p = samples.cloud.points()[i];
            let n = samples.normals[i];
            let origin = match cfg.origin {
                RayOrigin::Exterior => p + n * (cfg.origin_offset * radius + p.dist(center)),
                RayOrigin::Surface => p,
            };
            let base = -n;
            let mut rng = rng::stream(cfg.seed, 1 + i as u64);
            let mut dir = base;
            let mut attempts = 0;
            loop {
                attempts += 1;
                let ray = Ray::new(origin, dir).expect("direction is unit length");
                let c = count(&ray, t_min);
                if !c.degenerate {
                    break RayRecord {
                        sample: p,
                        face: samples.faces[i],
                        crossings: c.count,
                        attempts,
                        passed: c.count % 2 == 0,
                    };
                }
                if attempts > cfg.max_retries {
                    break RayRecord {
                        sample: p,
                        face: samples.faces[i],
                        crossings: c.count,
                        attempts,
                        passed: false,
                    };
                }
                dir = perturb(base, cfg.perturbation, &mut rng);
            }
        })
        .collect();

    let passed = records.iter().filter(|r| r.passed).count();
    let degenerate_rays = records.iter().filter(|r| r.attempts > 1).count();
    let unresolved_rays = records.iter().filter(|r| r.attempts > cfg.max_retries).count();
    Ok(WtReport {
        ratio: passed as f64 / cfg.rays as f64,
        rays: cfg.rays,
        passed,
        degenerate_rays,
        unresolved_rays,
        records: if keep_records { records } else { Vec::new() },
    })
}
