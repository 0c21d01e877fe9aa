//! Analytic shapes sampled uniformly by area, used as small training sets.

use std::f64::consts::TAU;

use rand::Rng;

use crate::geom::{Point3, PointCloud};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticShape {
    Sphere { radius: f64 },
    /// Ring of radius `major` around the z axis with tube radius `minor`.
    Torus { major: f64, minor: f64 },
    /// Axis-aligned box centered at the origin.
    Box { size: [f64; 3] },
    /// Closed cylinder along z, centered at the origin.
    Cylinder { radius: f64, height: f64 },
}

impl SyntheticShape {
    pub fn name(&self) -> &'static str {
        match self {
            SyntheticShape::Sphere { .. } => "sphere",
            SyntheticShape::Torus { .. } => "torus",
            SyntheticShape::Box { .. } => "box",
            SyntheticShape::Cylinder { .. } => "cylinder",
        }
    }

    /// Unit-scale instance of a named kind.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "sphere" => Ok(SyntheticShape::Sphere { radius: 1.0 }),
            "torus" => Ok(SyntheticShape::Torus { major: 1.0, minor: 0.3 }),
            "box" => Ok(SyntheticShape::Box { size: [1.0, 0.7, 0.5] }),
            "cylinder" => Ok(SyntheticShape::Cylinder { radius: 0.5, height: 1.2 }),
            _ => Err(Error::Parameter(format!(
                "unknown shape '{name}' (expected sphere, torus, box or cylinder)"
            ))),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SyntheticShape::Sphere { radius } => radius > 0.0,
            SyntheticShape::Torus { major, minor } => minor > 0.0 && major > minor,
            SyntheticShape::Box { size } => size.iter().all(|&s| s > 0.0),
            SyntheticShape::Cylinder { radius, height } => radius > 0.0 && height > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid dimensions for {self:?}")))
        }
    }

    /// `n` points uniform by area on the surface, in the shape's own frame.
    pub fn sample(&self, n: usize, seed: u64) -> Result<PointCloud> {
        self.validate()?;
        if n == 0 {
            return Err(Error::Size("cannot sample zero points".into()));
        }
        let mut rng = rng::stream(seed, 0x5a17);
        let points = (0..n).map(|_| self.sample_one(&mut rng)).collect();
        PointCloud::new(points)
    }

    fn sample_one(&self, rng: &mut impl Rng) -> Point3 {
        match *self {
            SyntheticShape::Sphere { radius } => {
                let z: f64 = rng.random_range(-1.0..=1.0);
                let phi = rng.random::<f64>() * TAU;
                let s = (1.0 - z * z).max(0.0).sqrt();
                Point3::new(s * phi.cos(), s * phi.sin(), z) * radius
            }
            SyntheticShape::Torus { major, minor } => {
                // The area element is proportional to major + minor cos(v).
                let v = loop {
                    let v = rng.random::<f64>() * TAU;
                    let accept = (major + minor * v.cos()) / (major + minor);
                    if rng.random::<f64>() <= accept {
                        break v;
                    }
                };
                let u = rng.random::<f64>() * TAU;
                let ring = major + minor * v.cos();
                Point3::new(ring * u.cos(), ring * u.sin(), minor * v.sin())
            }
            SyntheticShape::Box { size } => {
                let [a, b, c] = size;
                let areas = [b * c, b * c, a * c, a * c, a * b, a * b];
                let total: f64 = areas.iter().sum();
                let mut pick = rng.random::<f64>() * total;
                let mut face = 5;
                for (i, &ar) in areas.iter().enumerate() {
                    if pick < ar {
                        face = i;
                        break;
                    }
                    pick -= ar;
                }
                let axis = face / 2;
                let sign = if face % 2 == 0 { -0.5 } else { 0.5 };
                let mut p = [0.0; 3];
                for (k, pk) in p.iter_mut().enumerate() {
                    *pk = if k == axis {
                        sign * size[k]
                    } else {
                        (rng.random::<f64>() - 0.5) * size[k]
                    };
                }
                Point3::from_array(p)
            }
            SyntheticShape::Cylinder { radius, height } => {
                let side = TAU * radius * height;
                let cap = std::f64::consts::PI * radius * radius;
                let pick = rng.random::<f64>() * (side + 2.0 * cap);
                let phi = rng.random::<f64>() * TAU;
                if pick < side {
                    let z = (rng.random::<f64>() - 0.5) * height;
                    Point3::new(radius * phi.cos(), radius * phi.sin(), z)
                } else {
                    let r = radius * rng.random::<f64>().sqrt();
                    let z = if pick < side + cap { -0.5 * height } else { 0.5 * height };
                    Point3::new(r * phi.cos(), r * phi.sin(), z)
                }
            }
        }
    }
}
