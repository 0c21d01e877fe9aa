use std::collections::HashMap;

use super::{Point3, TriMesh};
use crate::{Error, Result};

/// Regular `m x m` sampling of the closed unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct UvGrid {
    resolution: usize,
    vertices: Vec<[f64; 2]>,
    quads: Vec<[usize; 4]>,
    triangles: Vec<[usize; 3]>,
}

impl UvGrid {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Vertex `(i, j)` sits at index `j * m + i`.
    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Quads as `[v00, v10, v11, v01]`, counterclockwise.
    pub fn quads(&self) -> &[[usize; 4]] {
        &self.quads
    }

    /// Each quad split along its `v00 - v11` diagonal.
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
}

pub fn uv_grid(m: usize) -> Result<UvGrid> {
    if m < 2 {
        return Err(Error::Parameter(format!("uv grid resolution must be >= 2, got {m}")));
    }
    let step = (m - 1) as f64;
    let vertices = (0..m)
        .flat_map(|j| (0..m).map(move |i| [i as f64 / step, j as f64 / step]))
        .collect();
    let mut quads = Vec::with_capacity((m - 1) * (m - 1));
    let mut triangles = Vec::with_capacity(2 * (m - 1) * (m - 1));
    for j in 0..m - 1 {
        for i in 0..m - 1 {
            let q = [j * m + i, j * m + i + 1, (j + 1) * m + i + 1, (j + 1) * m + i];
            quads.push(q);
            triangles.push([q[0], q[1], q[2]]);
            triangles.push([q[0], q[2], q[3]]);
        }
    }
    Ok(UvGrid { resolution: m, vertices, quads, triangles })
}

/// A cube grid projected onto the unit sphere, keeping its quads.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadSphere {
    pub mesh: TriMesh,
    /// Quads as `[c00, c10, c11, c01]` with outward orientation.
    pub quads: Vec<[usize; 4]>,
}

/// Closed quad sphere with `resolution` vertices along each cube edge.
pub fn quad_sphere(resolution: usize) -> Result<QuadSphere> {
    if resolution < 2 {
        return Err(Error::Parameter(format!(
            "sphere resolution must be >= 2, got {resolution}"
        )));
    }
    let r = resolution;
    let last = r - 1;
    let mut ids: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut quads = Vec::with_capacity(6 * last * last);

    let mut vertex = |lattice: [usize; 3]| -> usize {
        *ids.entry(lattice).or_insert_with(|| {
            let c = lattice.map(|v| 2.0 * v as f64 / last as f64 - 1.0);
            let p = Point3::from_array(c);
            vertices.push(p / p.norm());
            vertices.len() - 1
        })
    };

    for axis in 0..3 {
        // (u, v) axes chosen so that u x v points along +axis.
        let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0, last] {
            let (ua, va) = if side == last { (ua, va) } else { (va, ua) };
            let at = |a: usize, b: usize| {
                let mut l = [0; 3];
                l[axis] = side;
                l[ua] = a;
                l[va] = b;
                l
            };
            for b in 0..last {
                for a in 0..last {
                    quads.push([
                        vertex(at(a, b)),
                        vertex(at(a + 1, b)),
                        vertex(at(a + 1, b + 1)),
                        vertex(at(a, b + 1)),
                    ]);
                }
            }
        }
    }

    let faces = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    Ok(QuadSphere { mesh: TriMesh::new(vertices, faces)?, quads })
}

/// Triangulated quad sphere (see [`quad_sphere`]).
pub fn unit_sphere_quadgrid(resolution: usize) -> Result<TriMesh> {
    quad_sphere(resolution).map(|q| q.mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uv_grid_counts() {
        let g = uv_grid(2).unwrap();
        assert_eq!(g.vertices(), &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        assert_eq!(g.quads().len(), 1);
        assert_eq!(g.triangles().len(), 2);

        let g = uv_grid(3).unwrap();
        assert_eq!((g.vertices().len(), g.quads().len(), g.triangles().len()), (9, 4, 8));
        assert_eq!(g.vertices()[5], [1.0, 0.5]);
    }

    #[test]
    fn uv_grid_in_unit_square() {
        let g = uv_grid(7).unwrap();
        assert!(g.vertices().iter().flatten().all(|&c| (0.0..=1.0).contains(&c)));
    }

    #[test]
    fn uv_grid_rejects_small_resolution() {
        assert!(matches!(uv_grid(1), Err(Error::Parameter(_))));
    }

    #[test]
    fn sphere_is_closed_genus_zero() {
        for r in 2..8 {
            let m = unit_sphere_quadgrid(r).unwrap();
            let max_dev = m.vertices().iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max);
            assert!(max_dev <= 1e-12);
            assert_eq!(m.euler_characteristic(), 2, "resolution {r}");
            assert!(m.is_closed_manifold());
            assert_eq!(m.vertices().len(), 6 * (r - 1) * (r - 1) + 2);
        }
    }

    #[test]
    fn sphere_faces_point_outward() {
        let m = unit_sphere_quadgrid(5).unwrap();
        for f in 0..m.faces().len() {
            let [a, b, c] = m.triangle(f);
            let n = (b - a).cross(c - a);
            assert!(n.dot((a + b + c) / 3.0) > 0.0);
        }
    }
}
