use super::Ray;
use crate::geom::{Point3, TriMesh};

pub const DEFAULT_LEAF_CAPACITY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
        max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
    };

    pub fn grow(self, p: Point3) -> Self {
        Self { min: self.min.min(p), max: self.max.max(p) }
    }

    pub fn union(self, o: Self) -> Self {
        Self { min: self.min.min(o.min), max: self.max.max(o.max) }
    }

    pub fn contains(&self, o: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= o.min[k] && o.max[k] <= self.max[k])
    }

    /// Grows the box by a relative margin so that hits on its faces are
    /// never culled by rounding in the slab test.
    fn padded(self) -> Self {
        let ext = self.max - self.min;
        let pad = 1e-9 * (ext.x.abs() + ext.y.abs() + ext.z.abs()) + 1e-12;
        let d = Point3::new(pad, pad, pad);
        Self { min: self.min - d, max: self.max + d }
    }

    /// Whether the half-line can touch the box.
    pub fn hit_by(&self, ray: &Ray) -> bool {
        let (o, d) = (ray.origin(), ray.direction());
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for k in 0..3 {
            if d[k] == 0.0 {
                if o[k] < self.min[k] || o[k] > self.max[k] {
                    return false;
                }
                continue;
            }
            let inv = 1.0 / d[k];
            let (mut near, mut far) = ((self.min[k] - o[k]) * inv, (self.max[k] - o[k]) * inv);
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Bounding volume hierarchy over the triangles of a mesh.
///
/// Built by median splits of triangle centroids along the widest axis.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    faces: Vec<usize>,
    face_count: usize,
}

impl Bvh {
    pub fn build(mesh: &TriMesh, leaf_capacity: usize) -> Self {
        let n = mesh.faces().len();
        let boxes: Vec<Aabb> = (0..n)
            .map(|f| mesh.triangle(f).iter().fold(Aabb::EMPTY, |b, &p| b.grow(p)).padded())
            .collect();
        let centroids: Vec<Point3> = (0..n)
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                (a + b + c) / 3.0
            })
            .collect();
        let mut bvh = Bvh { nodes: Vec::new(), faces: (0..n).collect(), face_count: n };
        if n > 0 {
            bvh.build_node(0, n, leaf_capacity.max(1), &boxes, &centroids);
        }
        bvh
    }

    fn build_node(
        &mut self,
        start: usize,
        end: usize,
        cap: usize,
        boxes: &[Aabb],
        centroids: &[Point3],
    ) -> usize {
        let bounds = self.faces[start..end]
            .iter()
            .fold(Aabb::EMPTY, |b, &f| b.union(boxes[f]));
        let id = self.nodes.len();
        if end - start <= cap {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        let cb = self.faces[start..end]
            .iter()
            .fold(Aabb::EMPTY, |b, &f| b.grow(centroids[f]));
        let ext = cb.max - cb.min;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (end - start) / 2;
        self.faces[start..end].select_nth_unstable_by(mid, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        self.nodes.push(Node::Leaf { bounds, start: 0, end: 0 });
        let left = self.build_node(start, start + mid, cap, boxes, centroids);
        let right = self.build_node(start + mid, end, cap, boxes, centroids);
        self.nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    pub fn face_count(&self) -> usize {
        self.face_count
    }

    /// Calls `f` with every face whose box the ray touches.
    pub fn visit(&self, ray: &Ray, mut f: impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if !node.bounds().hit_by(ray) {
                continue;
            }
            match *node {
                Node::Leaf { start, end, .. } => self.faces[start..end].iter().for_each(|&i| f(i)),
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
    }

    /// Checks the structural invariants: every face in exactly one leaf and
    /// every parent box containing its children.
    pub fn is_consistent(&self) -> bool {
        let mut seen = vec![0usize; self.face_count];
        for node in &self.nodes {
            match *node {
                Node::Leaf { start, end, .. } => {
                    self.faces[start..end].iter().for_each(|&i| seen[i] += 1)
                }
                Node::Inner { bounds, left, right } => {
                    if !bounds.contains(self.nodes[left].bounds())
                        || !bounds.contains(self.nodes[right].bounds())
                    {
                        return false;
                    }
                }
            }
        }
        seen.iter().all(|&c| c == 1)
    }
}
