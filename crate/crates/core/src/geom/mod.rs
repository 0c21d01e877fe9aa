//! Geometric primitives shared by the rest of the crate: points, clouds,
//! triangle meshes, a kd-tree, surface sampling, grid generators and vertex
//! welding.

mod grid;
mod kdtree;
mod mesh;
mod point;
mod sample;
mod weld;

pub use grid::{quad_sphere, unit_sphere_quadgrid, uv_grid, QuadSphere, UvGrid};
pub use kdtree::{knn_brute_force, SpatialIndex, DEFAULT_LEAF_SIZE};
pub use mesh::{edge_sq_sum, TriMesh};
pub use point::{Point3, PointCloud};
pub use sample::{sample_surface, SurfaceSamples};
pub use weld::weld_vertices;

/// `k` nearest neighbors of `query` in `index`, nearest first.
pub fn knn(index: &SpatialIndex, query: Point3, k: usize) -> crate::Result<Vec<usize>> {
    index.knn(query, k)
}
