use rand_distr::{Distribution, StandardNormal};

use crate::{rng, Error, Result};

/// Latent code of one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Size("embedding has no coordinates".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("embedding has a non-finite coordinate".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// `(1 - t) z1 + t z2`.
pub fn interpolate(z1: &Embedding, z2: &Embedding, t: f64) -> Result<Embedding> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Parameter(format!("interpolation parameter {t} outside [0, 1]")));
    }
    if z1.dim() != z2.dim() {
        return Err(Error::Shape(format!(
            "embeddings have dimensions {} and {}",
            z1.dim(),
            z2.dim()
        )));
    }
    Embedding::new(z1.0.iter().zip(&z2.0).map(|(a, b)| (1.0 - t) * a + t * b).collect())
}

/// Diagonal Gaussian over embeddings.
///
/// Zero variances are allowed: a prior fitted to a single shape collapses to
/// its mean.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LatentPrior {
    moments: Option<(Vec<f64>, Vec<f64>)>,
}

impl LatentPrior {
    /// An unfitted prior; sampling from it is a state error.
    pub fn unfitted() -> Self {
        Self::default()
    }

    pub fn from_moments(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != variance.len() {
            return Err(Error::Shape(format!(
                "prior mean has {} entries and variance {}",
                mean.len(),
                variance.len()
            )));
        }
        if mean.iter().any(|m| !m.is_finite())
            || variance.iter().any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::Numeric("prior moments must be finite, variances >= 0".into()));
        }
        Ok(Self { moments: Some((mean, variance)) })
    }

    /// Per-coordinate mean and population variance.
    pub fn fit(embeddings: &[Embedding]) -> Result<Self> {
        let first = embeddings
            .first()
            .ok_or_else(|| Error::Size("cannot fit a prior to zero embeddings".into()))?;
        let d = first.dim();
        if embeddings.iter().any(|z| z.dim() != d) {
            return Err(Error::Shape("embeddings differ in dimension".into()));
        }
        let n = embeddings.len() as f64;
        let mut mean = vec![0.0; d];
        for z in embeddings {
            for (m, v) in mean.iter_mut().zip(z.values()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for z in embeddings {
            for ((s, v), m) in var.iter_mut().zip(z.values()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= n);
        Self::from_moments(mean, var)
    }

    pub fn is_fitted(&self) -> bool {
        self.moments.is_some()
    }

    pub fn mean(&self) -> Option<&[f64]> {
        self.moments.as_ref().map(|(m, _)| m.as_slice())
    }

    pub fn variance(&self) -> Option<&[f64]> {
        self.moments.as_ref().map(|(_, v)| v.as_slice())
    }

    pub fn sample(&self, seed: u64) -> Result<Embedding> {
        let (mean, var) = self
            .moments
            .as_ref()
            .ok_or_else(|| Error::State("latent prior has not been fitted".into()))?;
        let mut rng = rng::stream(seed, 0x1a7e);
        let values = mean
            .iter()
            .zip(var)
            .map(|(m, v)| {
                let e: f64 = StandardNormal.sample(&mut rng);
                m + v.sqrt() * e
            })
            .collect();
        Embedding::new(values)
    }
}

pub fn sample_latent(prior: &LatentPrior, seed: u64) -> Result<Embedding> {
    prior.sample(seed)
}
