use rand::seq::SliceRandom;

use super::{backward_traced, forward_traced, Fingerprint, Matrix, MlpSpec, ParamVector};
use crate::geom::Point3;
use crate::metrics::chamfer_with_grad;
use crate::{rng, Error, Result};

/// Central-difference step.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Components whose magnitude is below this fraction of the largest analytic
/// component are compared against that scale instead of their own size.
const RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Components compared.
    pub checked: usize,
    /// Components skipped because a perturbation changed discrete state
    /// (a ReLU switching, a nearest neighbor changing), where the function
    /// is not differentiable.
    pub skipped: usize,
}

/// Compares `analytic` with central differences of `f` at `x0` on up to
/// `count` components drawn in a seeded random order.
///
/// `f` returns the loss and a fingerprint of its discrete state. Components
/// whose perturbations change the fingerprint are skipped and replaced by
/// the next candidate.
pub fn check_gradient(
    x0: &[f64],
    analytic: &[f64],
    count: usize,
    seed: u64,
    mut f: impl FnMut(&[f64]) -> (f64, Fingerprint),
) -> GradCheck {
    assert_eq!(x0.len(), analytic.len(), "gradient length differs from point");
    let mut order: Vec<usize> = (0..x0.len()).collect();
    order.shuffle(&mut rng::stream(seed, 0x6c6b));
    let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let floor = (RELATIVE_FLOOR * scale).max(f64::MIN_POSITIVE);
    let (_, base) = f(x0);

    let mut x = x0.to_vec();
    let mut out = GradCheck { max_rel_error: 0.0, checked: 0, skipped: 0 };
    for &i in &order {
        if out.checked == count {
            break;
        }
        let h = GRAD_CHECK_STEP;
        x[i] = x0[i] + h;
        let (fp, sp) = f(&x);
        x[i] = x0[i] - h;
        let (fm, sm) = f(&x);
        x[i] = x0[i];
        if sp != base || sm != base {
            out.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        out.max_rel_error = out.max_rel_error.max(err);
        out.checked += 1;
    }
    out
}

/// Losses available to [`grad_check`]. Both average over rows.
#[derive(Debug, Clone, PartialEq)]
pub enum LossKind {
    /// `mean_r |y_r - t_r|^2`.
    Quadratic(Matrix),
    /// Chamfer distance between the output rows (as 3D points) and a target.
    Chamfer(Vec<Point3>),
}

impl LossKind {
    /// Loss value and its gradient with respect to the network output.
    pub fn evaluate(&self, output: &Matrix, fp: &mut Fingerprint) -> Result<(f64, Matrix)> {
        match self {
            LossKind::Quadratic(t) => {
                if t.shape() != output.shape() {
                    return Err(Error::Shape("quadratic targets differ in shape".into()));
                }
                let n = output.rows() as f64;
                let mut g = Matrix::zeros(output.rows(), output.cols());
                let mut loss = 0.0;
                for ((gi, &y), &ti) in g.data_mut().iter_mut().zip(output.data()).zip(t.data()) {
                    let d = y - ti;
                    loss += d * d;
                    *gi = 2.0 * d / n;
                }
                Ok((loss / n, g))
            }
            LossKind::Chamfer(target) => {
                let pts = rows_as_points(output)?;
                let c = chamfer_with_grad(&pts, target);
                fp.extend(c.a_to_b.iter().copied());
                fp.extend(c.b_to_a.iter().copied());
                let data = c.grad_a.iter().flat_map(|p| p.to_array()).collect();
                Ok((c.value, Matrix::from_vec(pts.len(), 3, data)?))
            }
        }
    }
}

/// Rows of a 3-column matrix as points.
pub(crate) fn rows_as_points(m: &Matrix) -> Result<Vec<Point3>> {
    if m.cols() != 3 {
        return Err(Error::Shape(format!("expected 3 columns, got {}", m.cols())));
    }
    Ok(m.iter_rows().map(|r| Point3::new(r[0], r[1], r[2])).collect())
}

/// Maximum relative error between backpropagated and finite-difference
/// parameter gradients of `loss(forward(batch))` on `count` parameters.
pub fn grad_check(
    spec: &MlpSpec,
    params: &ParamVector,
    batch: &Matrix,
    loss: &LossKind,
    count: usize,
    seed: u64,
) -> Result<GradCheck> {
    let eval = |p: &ParamVector| -> Result<(f64, Matrix, super::Trace, Fingerprint)> {
        let trace = forward_traced(spec, p, batch)?;
        let mut fp = Fingerprint::default();
        trace.fingerprint(&mut fp);
        let (l, g) = loss.evaluate(trace.output(), &mut fp)?;
        Ok((l, g, trace, fp))
    };
    let (_, g, trace, _) = eval(params)?;
    let mut analytic = vec![0.0; params.len()];
    backward_traced(spec, params, &trace, &g, &mut analytic, false)?;

    let mut probe = params.clone();
    let mut failure = None;
    let report = check_gradient(params.values(), &analytic, count, seed, |x| {
        probe.values_mut().copy_from_slice(x);
        match eval(&probe) {
            Ok((l, _, _, fp)) => (l, fp),
            Err(e) => {
                failure = Some(e);
                (f64::NAN, Fingerprint::default())
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
