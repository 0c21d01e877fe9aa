use crate::geom::Point3;
use crate::{Error, Result};

/// Barycentric distance to an edge below which a hit is degenerate.
pub const BARYCENTRIC_EPS: f64 = 1e-9;

/// Half-line `origin + t * direction`, `t >= 0`, with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Point3,
    direction: Point3,
}

impl Ray {
    pub fn new(origin: Point3, direction: Point3) -> Result<Self> {
        if !origin.is_finite() || (direction.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter("ray direction must be unit length".into()));
        }
        Ok(Self { origin, direction })
    }

    /// Ray from `origin` through `target`.
    pub fn towards(origin: Point3, target: Point3) -> Result<Self> {
        let d = (target - origin)
            .normalized()
            .ok_or_else(|| Error::Parameter("ray target coincides with origin".into()))?;
        Self::new(origin, d)
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn direction(&self) -> Point3 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hit {
    Miss,
    /// Clean crossing of the triangle interior at parameter `t`.
    Crossing(f64),
    /// Hit within [`BARYCENTRIC_EPS`] of an edge or vertex.
    Degenerate(f64),
}

/// Moller-Trumbore intersection of a ray with a triangle, in f64.
///
/// Rays parallel to the triangle plane never count as crossings.
pub fn intersect_triangle(ray: &Ray, [a, b, c]: [Point3; 3]) -> Hit {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = ray.direction.cross(e2);
    let det = e1.dot(pvec);
    let scale = e1.norm() * e2.norm();
    if det.abs() <= 1e-14 * scale || scale == 0.0 {
        return Hit::Miss;
    }
    let inv = 1.0 / det;
    let tvec = ray.origin - a;
    let u = tvec.dot(pvec) * inv;
    if !(-BARYCENTRIC_EPS..=1.0 + BARYCENTRIC_EPS).contains(&u) {
        return Hit::Miss;
    }
    let qvec = tvec.cross(e1);
    let v = ray.direction.dot(qvec) * inv;
    let w = 1.0 - u - v;
    if v < -BARYCENTRIC_EPS || w < -BARYCENTRIC_EPS {
        return Hit::Miss;
    }
    let t = e2.dot(qvec) * inv;
    if t < 0.0 {
        return Hit::Miss;
    }
    if u < BARYCENTRIC_EPS || v < BARYCENTRIC_EPS || w < BARYCENTRIC_EPS {
        Hit::Degenerate(t)
    } else {
        Hit::Crossing(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> [Point3; 3] {
        [Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)]
    }

    fn down(x: f64, y: f64) -> Ray {
        Ray::new(Point3::new(x, y, 1.0), Point3::new(0.0, 0.0, -1.0)).unwrap()
    }

    #[test]
    fn interior_hit() {
        assert_eq!(intersect_triangle(&down(0.25, 0.25), tri()), Hit::Crossing(1.0));
    }

    #[test]
    fn outside_and_behind_miss() {
        assert_eq!(intersect_triangle(&down(0.8, 0.8), tri()), Hit::Miss);
        let up = Ray::new(Point3::new(0.2, 0.2, 1.0), Point3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(intersect_triangle(&up, tri()), Hit::Miss);
    }

    #[test]
    fn edge_and_vertex_hits_are_degenerate() {
        assert!(matches!(intersect_triangle(&down(0.5, 0.5), tri()), Hit::Degenerate(_)));
        assert!(matches!(intersect_triangle(&down(0.3, 0.0), tri()), Hit::Degenerate(_)));
        assert!(matches!(intersect_triangle(&down(0.0, 0.0), tri()), Hit::Degenerate(_)));
    }

    #[test]
    fn parallel_ray_misses() {
        let r = Ray::new(Point3::new(-1.0, 0.2, 0.0), Point3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(intersect_triangle(&r, tri()), Hit::Miss);
    }

    #[test]
    fn rejects_non_unit_direction() {
        assert!(Ray::new(Point3::ZERO, Point3::new(0.0, 0.0, 2.0)).is_err());
    }
}
