use std::collections::BTreeMap;

use super::Point3;
use crate::{Error, Result};

/// Indexed triangle mesh.
///
/// Faces reference vertices by index. The edge set is derived from the faces
/// and is never stored separately, so it cannot drift out of sync.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i >= n) {
                return Err(Error::Geometry(format!(
                    "face {fi} references vertex out of range (vertex count {n})"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Geometry(format!("face {fi} repeats a vertex index")));
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn into_parts(self) -> (Vec<Point3>, Vec<[usize; 3]>) {
        (self.vertices, self.faces)
    }

    /// Replaces vertex positions keeping connectivity.
    pub fn with_vertices(&self, vertices: Vec<Point3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Size(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Ok(Self { vertices, faces: self.faces.clone() })
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(c - a).norm()
    }

    /// Unique undirected edges as `(lo, hi)` index pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| face_edges(*f))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Number of faces bordering each undirected edge.
    pub fn edge_face_counts(&self) -> BTreeMap<(usize, usize), usize> {
        let mut counts = BTreeMap::new();
        for f in &self.faces {
            for e in face_edges(*f) {
                *counts.entry(e).or_insert(0) += 1;
            }
        }
        counts
    }

    /// V - E + F over the vertices referenced by at least one face.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &i in f {
                used[i] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edges().len() as i64 + self.faces.len() as i64
    }

    /// True when every edge borders exactly two faces.
    pub fn is_closed_manifold(&self) -> bool {
        !self.faces.is_empty() && self.edge_face_counts().values().all(|&c| c == 2)
    }

    /// Concatenates meshes, offsetting face indices.
    pub fn merge(meshes: &[TriMesh]) -> TriMesh {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for m in meshes {
            let base = vertices.len();
            vertices.extend_from_slice(&m.vertices);
            faces.extend(m.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
        }
        TriMesh { vertices, faces }
    }

    pub fn bounding_sphere(&self) -> (Point3, f64) {
        let (lo, hi) = super::point::bounds_of(&self.vertices);
        let c = (lo + hi) * 0.5;
        let r = self.vertices.iter().map(|&p| p.dist(c)).fold(0.0, f64::max);
        (c, r)
    }
}

fn face_edges([a, b, c]: [usize; 3]) -> [(usize, usize); 3] {
    let e = |i: usize, j: usize| if i < j { (i, j) } else { (j, i) };
    [e(a, b), e(b, c), e(c, a)]
}

/// Sum of squared edge lengths over the deduplicated edge set.
pub fn edge_sq_sum(mesh: &TriMesh) -> f64 {
    mesh.edges()
        .iter()
        .map(|&(i, j)| mesh.vertices[i].dist_sq(mesh.vertices[j]))
        .sum()
}
