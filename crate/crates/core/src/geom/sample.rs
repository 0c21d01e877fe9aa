use rand::Rng;

use super::{Point3, PointCloud, TriMesh};
use crate::{rng, Error, Result};

/// Points sampled on a mesh together with their source faces.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSamples {
    pub cloud: PointCloud,
    pub faces: Vec<usize>,
    /// Unit normal of each sample's source face.
    pub normals: Vec<Point3>,
}

/// Area-weighted uniform sampling of a triangle mesh.
///
/// Faces are drawn with probability proportional to their area and points are
/// uniform within each face.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<SurfaceSamples> {
    if n == 0 {
        return Err(Error::Size("sample count must be positive".into()));
    }
    let mut cdf = Vec::with_capacity(mesh.faces().len());
    let mut total = 0.0;
    for f in 0..mesh.faces().len() {
        total += mesh.face_area(f);
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::Geometry("mesh has no face with positive area".into()));
    }

    let mut rng = rng::stream(seed, 0x5a3d);
    let mut points = Vec::with_capacity(n);
    let mut faces = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.random::<f64>() * total;
        let f = cdf.partition_point(|&c| c <= x).min(cdf.len() - 1);
        let [a, b, c] = mesh.triangle(f);
        let (mut r1, mut r2) = (rng.random::<f64>(), rng.random::<f64>());
        if r1 + r2 > 1.0 {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        points.push(a + (b - a) * r1 + (c - a) * r2);
        faces.push(f);
        normals.push((b - a).cross(c - a).normalized().unwrap_or(Point3::new(0.0, 0.0, 1.0)));
    }
    Ok(SurfaceSamples { cloud: PointCloud::new(points)?, faces, normals })
}
