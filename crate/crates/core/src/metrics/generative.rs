use rayon::prelude::*;

use super::{CloudSet, DistanceKind};
use crate::Result;

/// Voxels per axis of the occupancy grid over `[-1, 1]^3`.
pub const DEFAULT_JSD_GRID: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JsdReport {
    /// Divergence in nats, within `[0, ln 2]`.
    pub value: f64,
    /// Points that fell outside `[-1, 1]^3` and were clamped to the border.
    pub clamped: usize,
}

/// Pooled occupancy counts of every point in `set`, plus the number of
/// points clamped into border voxels.
pub fn occupancy_histogram(set: &CloudSet, grid: usize) -> (Vec<f64>, usize) {
    let g = grid.max(1);
    let mut counts = vec![0.0; g * g * g];
    let mut clamped = 0;
    let voxel = |c: f64, out: &mut bool| -> usize {
        if !(-1.0..=1.0).contains(&c) {
            *out = true;
        }
        let v = ((c + 1.0) * 0.5 * g as f64).floor();
        if v.is_nan() {
            0
        } else {
            (v.max(0.0) as usize).min(g - 1)
        }
    };
    for cloud in set.clouds() {
        for p in cloud.points() {
            let mut out = false;
            let (i, j, k) = (voxel(p.x, &mut out), voxel(p.y, &mut out), voxel(p.z, &mut out));
            clamped += out as usize;
            counts[(i * g + j) * g + k] += 1.0;
        }
    }
    (counts, clamped)
}

/// Jensen-Shannon divergence of two (unnormalized) histograms in nats.
///
/// Terms with zero mass contribute nothing.
pub fn jsd_of_distributions(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "histograms must have equal length");
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (&pc, &qc) in p.iter().zip(q) {
        let (pi, qi) = (pc / sp, qc / sq);
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            kl_p += pi * (pi / m).ln();
        }
        if qi > 0.0 {
            kl_q += qi * (qi / m).ln();
        }
    }
    (0.5 * (kl_p + kl_q)).clamp(0.0, std::f64::consts::LN_2)
}

/// JSD between the pooled occupancy distributions of two cloud sets.
pub fn jsd(gen: &CloudSet, reference: &CloudSet, grid: usize) -> JsdReport {
    let (p, cp) = occupancy_histogram(gen, grid);
    let (q, cq) = occupancy_histogram(reference, grid);
    JsdReport { value: jsd_of_distributions(&p, &q), clamped: cp + cq }
}

/// `d[g][r]` for every generated cloud `g` and reference cloud `r`.
pub fn pairwise_distances(
    gen: &CloudSet,
    reference: &CloudSet,
    kind: DistanceKind,
) -> Result<Vec<Vec<f64>>> {
    let pairs: Vec<(usize, usize)> = (0..gen.len())
        .flat_map(|g| (0..reference.len()).map(move |r| (g, r)))
        .collect();
    let flat = pairs
        .par_iter()
        .map(|&(g, r)| kind.distance(&gen.clouds()[g], &reference.clouds()[r]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(flat.chunks(reference.len()).map(<[f64]>::to_vec).collect())
}

fn mmd_from(d: &[Vec<f64>]) -> f64 {
    let refs = d[0].len();
    let total: f64 = (0..refs)
        .map(|r| d.iter().map(|row| row[r]).fold(f64::INFINITY, f64::min))
        .sum();
    total / refs as f64
}

fn cov_from(d: &[Vec<f64>]) -> f64 {
    let refs = d[0].len();
    let mut covered = vec![false; refs];
    for row in d {
        let mut best = 0;
        for (r, &v) in row.iter().enumerate() {
            if v < row[best] {
                best = r;
            }
        }
        covered[best] = true;
    }
    covered.iter().filter(|&&c| c).count() as f64 / refs as f64
}

/// Minimum matching distance: mean over references of the distance to the
/// closest generated cloud.
pub fn mmd(gen: &CloudSet, reference: &CloudSet, kind: DistanceKind) -> Result<f64> {
    Ok(mmd_from(&pairwise_distances(gen, reference, kind)?))
}

/// Coverage: fraction of references that are the nearest reference of at
/// least one generated cloud.
pub fn cov(gen: &CloudSet, reference: &CloudSet, kind: DistanceKind) -> Result<f64> {
    Ok(cov_from(&pairwise_distances(gen, reference, kind)?))
}

/// MMD and COV from one shared distance matrix.
pub fn mmd_and_cov(gen: &CloudSet, reference: &CloudSet, kind: DistanceKind) -> Result<(f64, f64)> {
    let d = pairwise_distances(gen, reference, kind)?;
    Ok((mmd_from(&d), cov_from(&d)))
}
