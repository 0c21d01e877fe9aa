use rayon::prelude::*;

use crate::geom::{Point3, SpatialIndex};
use crate::{PointCloud, Result};

/// Below this many targets a linear scan beats building a tree.
const TREE_THRESHOLD: usize = 64;

/// For each point of `from`, the nearest point of `to` (lowest index on
/// ties) and the squared distance to it.
pub fn nearest_assignments(from: &[Point3], to: &[Point3]) -> Vec<(usize, f64)> {
    assert!(!to.is_empty(), "nearest_assignments needs a nonempty target");
    if to.len() <= TREE_THRESHOLD {
        from.iter()
            .map(|&p| {
                let mut best = (0, p.dist_sq(to[0]));
                for (j, &q) in to.iter().enumerate().skip(1) {
                    let d = p.dist_sq(q);
                    if d < best.1 {
                        best = (j, d);
                    }
                }
                best
            })
            .collect()
    } else {
        let index = SpatialIndex::with_leaf_size(to, crate::geom::DEFAULT_LEAF_SIZE);
        from.par_iter()
            .with_min_len(256)
            .map(|&p| index.nearest(p).expect("target is nonempty"))
            .collect()
    }
}

fn mean_sq(assign: &[(usize, f64)]) -> f64 {
    assign.iter().map(|&(_, d)| d).sum::<f64>() / assign.len() as f64
}

/// Symmetric Chamfer distance with squared distances and per-side means.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    Ok(chamfer_points(a.points(), b.points()))
}

pub(crate) fn chamfer_points(a: &[Point3], b: &[Point3]) -> f64 {
    mean_sq(&nearest_assignments(a, b)) + mean_sq(&nearest_assignments(b, a))
}

/// Chamfer value with gradients with respect to both inputs.
#[derive(Debug, Clone)]
pub struct ChamferGrad {
    pub value: f64,
    pub grad_a: Vec<Point3>,
    pub grad_b: Vec<Point3>,
    /// Nearest index in `b` for each point of `a`.
    pub a_to_b: Vec<usize>,
    /// Nearest index in `a` for each point of `b`.
    pub b_to_a: Vec<usize>,
}

pub fn chamfer_with_grad(a: &[Point3], b: &[Point3]) -> ChamferGrad {
    let ab = nearest_assignments(a, b);
    let ba = nearest_assignments(b, a);
    let value = mean_sq(&ab) + mean_sq(&ba);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut grad_a = vec![Point3::ZERO; a.len()];
    let mut grad_b = vec![Point3::ZERO; b.len()];
    for (i, &(j, _)) in ab.iter().enumerate() {
        let d = (a[i] - b[j]) * (2.0 / na);
        grad_a[i] += d;
        grad_b[j] -= d;
    }
    for (j, &(i, _)) in ba.iter().enumerate() {
        let d = (b[j] - a[i]) * (2.0 / nb);
        grad_b[j] += d;
        grad_a[i] -= d;
    }
    ChamferGrad {
        value,
        grad_a,
        grad_b,
        a_to_b: ab.into_iter().map(|(j, _)| j).collect(),
        b_to_a: ba.into_iter().map(|(i, _)| i).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(pts.iter().map(|&p| Point3::from_array(p)).collect()).unwrap()
    }

    #[test]
    fn examples() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0, 0.0]]);
        assert_eq!(chamfer(&a, &b).unwrap(), 2.0);
        let a2 = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        assert_eq!(chamfer(&a2, &a).unwrap(), 0.5);
        assert_eq!(chamfer(&a2, &a2).unwrap(), 0.0);
    }

    #[test]
    fn tree_and_scan_agree() {
        let pts: Vec<Point3> = (0..300)
            .map(|i| {
                let t = i as f64 * 0.37;
                Point3::new(t.sin(), (1.7 * t).cos(), (0.3 * t).sin())
            })
            .collect();
        let q: Vec<Point3> = pts.iter().map(|&p| p * 0.9 + Point3::new(0.01, 0.0, 0.0)).collect();
        let tree = nearest_assignments(&q, &pts);
        for (i, &p) in q.iter().enumerate() {
            let brute = crate::geom::knn_brute_force(&pts, p, 1)[0];
            assert_eq!(tree[i].0, brute);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let a: Vec<Point3> = (0..7)
            .map(|i| Point3::new(i as f64 * 0.31, (i as f64).sin(), 0.2 * i as f64))
            .collect();
        let b: Vec<Point3> = (0..5)
            .map(|i| Point3::new(i as f64 * 0.45 + 0.1, (i as f64 * 1.3).cos(), -0.1 * i as f64))
            .collect();
        let g = chamfer_with_grad(&a, &b);
        let h = 1e-6;
        for i in 0..a.len() {
            for axis in 0..3 {
                let mut plus = a.clone();
                let mut minus = a.clone();
                let mut e = [0.0; 3];
                e[axis] = h;
                plus[i] += Point3::from_array(e);
                minus[i] -= Point3::from_array(e);
                let fd = (chamfer_points(&plus, &b) - chamfer_points(&minus, &b)) / (2.0 * h);
                assert!((fd - g.grad_a[i][axis]).abs() < 1e-7);
            }
        }
    }
}
