use std::collections::HashMap;

use super::{Point3, TriMesh};
use crate::{Error, Result};

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Returns true when two distinct sets were joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // Smaller root wins so cluster order follows first appearance.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

/// Merges vertices closer than `epsilon` into their cluster centroid.
///
/// Clusters are the connected components of the "within epsilon" relation,
/// found with a hash grid of cell size `epsilon`. Merging repeats until no
/// two output vertices are within `epsilon`, which makes the operation
/// idempotent. Faces that lose a distinct corner are dropped.
pub fn weld_vertices(mesh: &TriMesh, epsilon: f64) -> Result<TriMesh> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::Parameter(format!("weld epsilon must be finite and >= 0, got {epsilon}")));
    }
    let mut current = mesh.clone();
    loop {
        let (next, merged) = weld_pass(&current, epsilon)?;
        current = next;
        if !merged {
            return Ok(current);
        }
    }
}

fn weld_pass(mesh: &TriMesh, epsilon: f64) -> Result<(TriMesh, bool)> {
    let verts = mesh.vertices();
    let mut sets = DisjointSet::new(verts.len());
    let mut merged = false;

    if epsilon == 0.0 {
        let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
        for (i, p) in verts.iter().enumerate() {
            // `+ 0.0` folds -0.0 into 0.0.
            let key = p.to_array().map(|c| (c + 0.0).to_bits());
            match seen.get(&key) {
                Some(&j) => merged |= sets.union(i, j),
                None => {
                    seen.insert(key, i);
                }
            }
        }
    } else {
        let cell = |p: Point3| p.to_array().map(|c| (c / epsilon).floor() as i64);
        let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, &p) in verts.iter().enumerate() {
            grid.entry(cell(p)).or_default().push(i);
        }
        let eps_sq = epsilon * epsilon;
        for (i, &p) in verts.iter().enumerate() {
            let c = cell(p);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let Some(bucket) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                            continue;
                        };
                        for &j in bucket {
                            if j > i && p.dist_sq(verts[j]) <= eps_sq {
                                merged |= sets.union(i, j);
                            }
                        }
                    }
                }
            }
        }
    }

    if !merged {
        return Ok((mesh.clone(), false));
    }

    let mut cluster_of_root: HashMap<usize, usize> = HashMap::new();
    let mut remap = Vec::with_capacity(verts.len());
    let mut sums: Vec<(Point3, usize)> = Vec::new();
    for (i, &p) in verts.iter().enumerate() {
        let root = sets.find(i);
        let next = cluster_of_root.len();
        let c = *cluster_of_root.entry(root).or_insert(next);
        if c == sums.len() {
            sums.push((Point3::ZERO, 0));
        }
        sums[c].0 += p;
        sums[c].1 += 1;
        remap.push(c);
    }
    let vertices = sums.iter().map(|&(s, n)| s / n as f64).collect();
    let faces = mesh
        .faces()
        .iter()
        .map(|f| f.map(|i| remap[i]))
        .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
        .collect();
    Ok((TriMesh::new(vertices, faces)?, true))
}
