use nalgebra::DMatrix;

use super::WEIGHT_CLIP;
use crate::error::{Error, Result};
use crate::linalg::{null_vector, singular_values};
use crate::RealVector;

/// A sub-combination picked from a list of points: `indices` into the input,
/// with their new weights. `total` equals the input weight sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub total: f64,
}

/// Reduces `sum_i weights[i] * points[i]` (which must equal
/// `target * sum(weights)`) to at most `n + 1` of the input points.
///
/// Points are streamed into an active set. Whenever the set holds `n + 2`
/// points, a null vector `c` of the `(n+1) x (n+2)` system `[points; 1] c = 0`
/// is taken from the SVD and the weights are shifted along `-c` until one of
/// them reaches zero, which removes that point without changing the weighted
/// sum or the total.
pub fn caratheodory_finite(
    points: &[RealVector],
    weights: &[f64],
    target: &RealVector,
    tol: f64,
    rank_tol: f64,
) -> Result<Selection> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} points with {} weights",
            points.len(),
            weights.len()
        )));
    }
    let n = target.len();
    if points.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidInput("points and target differ in dimension".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("weights sum to zero".into()));
    }
    let residual = weighted_residual(points, weights.iter().copied().enumerate(), target, total);
    let scale = 1.0 + target.amax();
    if residual > tol * scale {
        return Err(Error::Infeasible { residual });
    }

    let mut active: Vec<(usize, f64)> = Vec::with_capacity(n + 2);
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        active.push((i, w));
        if active.len() > n + 1 && !eliminate_one(points, &mut active, total) {
            return Err(Error::Reconstruction { residual: f64::NAN });
        }
    }

    // The survivors may still be affinely dependent (e.g. collinear points in
    // the plane); keep eliminating until they are not.
    while active.len() > 1 && affinely_dependent(points, &active, rank_tol) {
        if !eliminate_one(points, &mut active, total) {
            break;
        }
    }

    let sum: f64 = active.iter().map(|a| a.1).sum();
    let factor = total / sum;
    let selection = Selection {
        indices: active.iter().map(|a| a.0).collect(),
        weights: active.iter().map(|a| a.1 * factor).collect(),
        total,
    };
    let residual = weighted_residual(
        points,
        selection.indices.iter().copied().zip(selection.weights.iter().copied()),
        target,
        total,
    );
    if residual > tol * scale {
        return Err(Error::Reconstruction { residual });
    }
    Ok(selection)
}

fn affine_system(points: &[RealVector], active: &[(usize, f64)]) -> DMatrix<f64> {
    let n = points[active[0].0].len();
    let mut system = DMatrix::zeros(n + 1, active.len());
    for (col, &(i, _)) in active.iter().enumerate() {
        system.view_mut((0, col), (n, 1)).copy_from(&points[i]);
        system[(n, col)] = 1.0;
    }
    system
}

fn affinely_dependent(points: &[RealVector], active: &[(usize, f64)], rank_tol: f64) -> bool {
    let s = singular_values(&affine_system(points, active));
    s.len() < active.len() || s[s.len() - 1] <= rank_tol * s[0]
}

/// Removes at least one point from an affinely dependent active set.
/// Returns false when the null vector has no positive entry.
pub(crate) fn eliminate_one(points: &[RealVector], active: &mut Vec<(usize, f64)>, total: f64) -> bool {
    let mut c = null_vector(&affine_system(points, active));
    // Orient so the largest-magnitude entry is positive.
    let imax = c.iamax();
    if c[imax] < 0.0 {
        c.neg_mut();
    }

    let mut step = f64::INFINITY;
    let mut drop = usize::MAX;
    for (j, &(_, w)) in active.iter().enumerate() {
        if c[j] > 0.0 {
            let ratio = w / c[j];
            if ratio < step {
                step = ratio;
                drop = j;
            }
        }
    }
    if drop == usize::MAX {
        return false;
    }
    for (j, entry) in active.iter_mut().enumerate() {
        entry.1 = if j == drop { 0.0 } else { entry.1 - step * c[j] };
        if entry.1 < WEIGHT_CLIP * total {
            entry.1 = entry.1.max(0.0);
        }
    }
    active.retain(|a| a.1 > 0.0);
    true
}

fn weighted_residual(
    points: &[RealVector],
    terms: impl Iterator<Item = (usize, f64)>,
    target: &RealVector,
    total: f64,
) -> f64 {
    let mut acc = RealVector::zeros(target.len());
    for (i, w) in terms {
        acc += &points[i] * w;
    }
    (acc / total - target).amax()
}
