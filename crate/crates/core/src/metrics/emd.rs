use std::collections::VecDeque;

use crate::geom::Point3;
use crate::{Error, PointCloud, Result};

/// Largest cloud size accepted by the exact solver.
pub const EXACT_EMD_LIMIT: usize = 512;

/// Epsilon-scaling phases used by [`emd_approx`] callers that have no
/// preference.
pub const DEFAULT_AUCTION_PHASES: usize = 10;

/// Each auction phase shrinks epsilon by this factor.
const EPS_SHRINK: f64 = 8.0;

fn check_sizes(a: &[Point3], b: &[Point3]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Size("EMD needs nonempty clouds".into()));
    }
    if a.len() != b.len() {
        return Err(Error::Size(format!(
            "EMD needs equal cloud sizes, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn cost_matrix(a: &[Point3], b: &[Point3]) -> Vec<f64> {
    let n = b.len();
    let mut c = vec![0.0; a.len() * n];
    for (i, &p) in a.iter().enumerate() {
        for (j, &q) in b.iter().enumerate() {
            c[i * n + j] = p.dist(q);
        }
    }
    c
}

fn assignment_cost(a: &[Point3], b: &[Point3], assign: &[usize]) -> f64 {
    let total: f64 = a.iter().zip(assign).map(|(&p, &j)| p.dist(b[j])).sum();
    total / a.len() as f64
}

/// Minimum-cost perfect matching on a dense square cost matrix.
///
/// Shortest augmenting path formulation of the Hungarian method with row and
/// column potentials, O(n^3). Returns the column assigned to each row.
fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    // 1-based arrays, index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[row_of_col[j] - 1] = j - 1;
    }
    assign
}

/// Optimal bijection from `a` to `b` under Euclidean cost.
pub fn assignment_exact(a: &[Point3], b: &[Point3]) -> Result<Vec<usize>> {
    check_sizes(a, b)?;
    if a.len() > EXACT_EMD_LIMIT {
        return Err(Error::Capacity(format!(
            "exact EMD supports at most {EXACT_EMD_LIMIT} points, got {}; use emd_approx",
            a.len()
        )));
    }
    Ok(hungarian(&cost_matrix(a, b), a.len()))
}

/// Exact earth mover's distance: the mean Euclidean cost of the optimal
/// bijection between two equal-size clouds.
pub fn emd_exact(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    let assign = assignment_exact(a.points(), b.points())?;
    Ok(assignment_cost(a.points(), b.points(), &assign))
}

/// Forward auction with epsilon scaling.
///
/// Every phase produces a complete assignment that is within `n * eps` of the
/// optimum; prices carry over between phases.
fn auction(cost: &[f64], n: usize, phases: usize) -> Vec<usize> {
    let max_cost = cost.iter().cloned().fold(0.0, f64::max);
    if max_cost == 0.0 {
        return (0..n).collect();
    }
    let mut prices = vec![0.0; n];
    let mut eps = max_cost / 4.0;
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    for phase in 0..phases.max(1) {
        if phase > 0 {
            eps /= EPS_SHRINK;
        }
        owner.fill(None);
        assigned.fill(None);
        let mut queue: VecDeque<usize> = (0..n).collect();
        while let Some(i) = queue.pop_front() {
            let row = &cost[i * n..(i + 1) * n];
            // Value of object j to person i is -(cost + price).
            let (mut best_j, mut best, mut second) = (0, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for (j, (&c, &p)) in row.iter().zip(&prices).enumerate() {
                let val = -(c + p);
                if val > best {
                    second = best;
                    best = val;
                    best_j = j;
                } else if val > second {
                    second = val;
                }
            }
            let increment = if second.is_finite() { best - second + eps } else { eps };
            prices[best_j] += increment;
            if let Some(prev) = owner[best_j].replace(i) {
                assigned[prev] = None;
                queue.push_back(prev);
            }
            assigned[i] = Some(best_j);
        }
    }
    assigned.into_iter().map(|j| j.expect("auction assigns every person")).collect()
}

/// Auction approximation of [`emd_exact`].
///
/// The returned value is the cost of a feasible bijection, so it never
/// undercuts the exact value; `phases` controls how close it gets.
pub fn emd_approx(a: &PointCloud, b: &PointCloud, phases: usize) -> Result<f64> {
    check_sizes(a.points(), b.points())?;
    let n = a.len();
    let assign = auction(&cost_matrix(a.points(), b.points()), n, phases);
    Ok(assignment_cost(a.points(), b.points(), &assign))
}

/// Exact EMD up to [`EXACT_EMD_LIMIT`] points, auction beyond.
pub fn emd(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.len() <= EXACT_EMD_LIMIT {
        emd_exact(a, b)
    } else {
        emd_approx(a, b, DEFAULT_AUCTION_PHASES)
    }
}

#[derive(Debug, Clone)]
pub struct EmdGrad {
    pub value: f64,
    pub grad_a: Vec<Point3>,
    pub assignment: Vec<usize>,
}

/// EMD with its gradient with respect to `a` under a fixed optimal matching.
pub fn emd_with_grad(a: &[Point3], b: &[Point3]) -> Result<EmdGrad> {
    check_sizes(a, b)?;
    let n = a.len();
    let assignment = if n <= EXACT_EMD_LIMIT {
        assignment_exact(a, b)?
    } else {
        auction(&cost_matrix(a, b), n, DEFAULT_AUCTION_PHASES)
    };
    let value = assignment_cost(a, b, &assignment);
    let grad_a = a
        .iter()
        .zip(&assignment)
        .map(|(&p, &j)| {
            let d = p - b[j];
            let len = d.norm();
            if len > 0.0 {
                d / (len * n as f64)
            } else {
                Point3::ZERO
            }
        })
        .collect();
    Ok(EmdGrad { value, grad_a, assignment })
}
