//! Distances between point clouds and generative metrics between sets of
//! point clouds.

mod chamfer;
mod emd;
mod generative;

pub use chamfer::{chamfer, chamfer_with_grad, nearest_assignments, ChamferGrad};
pub use emd::{
    assignment_exact, emd, emd_approx, emd_exact, emd_with_grad, EmdGrad,
    DEFAULT_AUCTION_PHASES, EXACT_EMD_LIMIT,
};
pub use generative::{
    cov, jsd, jsd_of_distributions, mmd, mmd_and_cov, occupancy_histogram, pairwise_distances,
    JsdReport,
    DEFAULT_JSD_GRID,
};

use crate::{Error, PointCloud, Result};

/// Which set-to-set distance a generative metric is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    /// Chamfer distance.
    Cd,
    /// Earth mover's distance.
    Emd,
}

impl DistanceKind {
    pub fn distance(self, a: &PointCloud, b: &PointCloud) -> Result<f64> {
        match self {
            DistanceKind::Cd => chamfer(a, b),
            DistanceKind::Emd => emd(a, b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Cd => "CD",
            DistanceKind::Emd => "EMD",
        }
    }
}

/// A nonempty collection of point clouds that all have the same size.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudSet {
    clouds: Vec<PointCloud>,
}

impl CloudSet {
    pub fn new(clouds: Vec<PointCloud>) -> Result<Self> {
        let Some(first) = clouds.first() else {
            return Err(Error::Size("cloud set must not be empty".into()));
        };
        let n = first.len();
        if let Some(i) = clouds.iter().position(|c| c.len() != n) {
            return Err(Error::Size(format!(
                "cloud {i} has {} points, expected {n}",
                clouds[i].len()
            )));
        }
        Ok(Self { clouds })
    }

    pub fn clouds(&self) -> &[PointCloud] {
        &self.clouds
    }

    pub fn len(&self) -> usize {
        self.clouds.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Points per cloud.
    pub fn cloud_size(&self) -> usize {
        self.clouds[0].len()
    }

    pub fn into_clouds(self) -> Vec<PointCloud> {
        self.clouds
    }
}
