use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Point3, PointCloud};
use crate::{Error, Result};

pub const DEFAULT_LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Balanced kd-tree over a point cloud.
///
/// Queries return exactly what a brute-force scan sorted by
/// `(squared distance, index)` returns.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    leaf_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist_sq: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl SpatialIndex {
    pub fn new(cloud: &PointCloud) -> Self {
        Self::with_leaf_size(cloud.points(), DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(points: &[Point3], leaf_size: usize) -> Self {
        let leaf_size = leaf_size.max(1);
        let mut index = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
            leaf_size,
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= self.leaf_size {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &self.order[start..end];
        let (lo, hi) = super::point::bounds_of(
            &slice.iter().map(|&i| self.points[i]).collect::<Vec<_>>(),
        );
        let ext = hi - lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis]
                .total_cmp(&points[b][axis])
                .then(a.cmp(&b))
        });
        let value = self.points[self.order[start + mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// The `k` nearest points to `query`, nearest first, ties broken by
    /// lower index.
    pub fn knn(&self, query: Point3, k: usize) -> Result<Vec<usize>> {
        if k == 0 {
            return Err(Error::Parameter("k must be positive".into()));
        }
        if k > self.points.len() {
            return Err(Error::Size(format!(
                "k = {k} exceeds cloud size {}",
                self.points.len()
            )));
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, &mut heap);
        let mut found = heap.into_vec();
        found.sort_unstable();
        Ok(found.into_iter().map(|c| c.index).collect())
    }

    /// Index of and squared distance to the nearest point.
    pub fn nearest(&self, query: Point3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut heap = BinaryHeap::with_capacity(2);
        self.search(0, query, 1, &mut heap);
        heap.pop().map(|c| (c.index, c.dist_sq))
    }

    fn search(&self, node: usize, q: Point3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate { dist_sq: self.points[i].dist_sq(q), index: i };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, heap);
                // Points on the far side are at least |diff| away along `axis`.
                // Equal bounds must still be visited for the index tie rule.
                let bound = diff * diff;
                if heap.len() < k || bound <= heap.peek().expect("heap is nonempty").dist_sq {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

/// Reference scan used to validate the tree.
pub fn knn_brute_force(points: &[Point3], query: Point3, k: usize) -> Vec<usize> {
    let mut all: Vec<Candidate> = points
        .iter()
        .enumerate()
        .map(|(index, p)| Candidate { dist_sq: p.dist_sq(query), index })
        .collect();
    all.sort_unstable();
    all.truncate(k);
    all.into_iter().map(|c| c.index).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line() -> PointCloud {
        PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(3.0, 0.0, 0.0),
        ])
        .unwrap()
    }

    #[test]
    fn knn_examples() {
        let idx = SpatialIndex::new(&line());
        assert_eq!(idx.knn(Point3::ZERO, 1).unwrap(), vec![0]);
        assert_eq!(idx.knn(Point3::ZERO, 2).unwrap(), vec![0, 1]);
        assert_eq!(idx.knn(Point3::ZERO, 3).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn knn_rejects_oversized_k() {
        let idx = SpatialIndex::new(&line());
        assert!(matches!(idx.knn(Point3::ZERO, 4), Err(Error::Size(_))));
    }

    #[test]
    fn ties_prefer_lower_index() {
        let pts = vec![
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, -1.0, 0.0),
        ];
        let idx = SpatialIndex::with_leaf_size(&pts, 1);
        assert_eq!(idx.knn(Point3::ZERO, 2).unwrap(), vec![0, 1]);
        assert_eq!(idx.nearest(Point3::ZERO), Some((0, 1.0)));
    }

    fn coord() -> impl Strategy<Value = f64> {
        // A coarse lattice produces plenty of exact distance ties.
        (-8i32..=8).prop_map(|v| v as f64 / 4.0)
    }

    fn point() -> impl Strategy<Value = Point3> {
        (coord(), coord(), coord()).prop_map(|(x, y, z)| Point3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            pts in prop::collection::vec(point(), 1..200),
            q in point(),
            k_frac in 0.0f64..1.0,
            leaf in 1usize..20,
        ) {
            let k = 1 + ((pts.len() - 1) as f64 * k_frac) as usize;
            let idx = SpatialIndex::with_leaf_size(&pts, leaf);
            prop_assert_eq!(idx.knn(q, k).unwrap(), knn_brute_force(&pts, q, k));
        }
    }
}
