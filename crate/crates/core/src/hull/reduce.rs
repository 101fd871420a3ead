use nalgebra::DMatrix;

use super::caratheodory::eliminate_one;
use super::frame::{build_frame, first_zero_crossing};
use super::{ConvexCombination, Curve, HullConfig, WEIGHT_CLIP};
use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::RealVector;

/// Rewrites a combination of `n + 1` ordered curve points as a combination of
/// at most `n` curve points with the same total and the same mean `v`.
///
/// With `t_0 < t_1 < ... < t_n`, the frame at `v` spanned by
/// `x(t_1) - v, ..., x(t_n) - v` gives `x(t_0)` strictly negative
/// coordinates while `x(t_1)` has coordinate 1 in the first slot. Sliding from
/// `t_0` to the first parameter `s` where the largest coordinate `p_k`
/// vanishes leaves every other `p_j <= 0`, and
///
/// ```text
/// v = (x(s) - sum_{j != k} p_j x(t_j)) / (1 - sum_{j != k} p_j)
/// ```
///
/// is a convex combination of `x(s)` and the `x(t_j)`, `j != k`.
///
/// Zero-weight terms are dropped and the rest returned as is. Combinations
/// that are already short enough are returned unchanged. When the `n + 1`
/// points lie in a hyperplane, one of them is removed along an affine
/// dependence instead of sliding.
pub fn reduce_on_curve<C: Curve + ?Sized>(
    curve: &C,
    comb: &ConvexCombination,
    v: &RealVector,
    config: &HullConfig,
) -> Result<ConvexCombination> {
    let n = curve.dim();
    if v.len() != n {
        return Err(Error::InvalidInput(format!(
            "target has dimension {}, curve has {n}",
            v.len()
        )));
    }
    if comb.weights.iter().any(|w| *w <= 0.0) {
        let pairs = comb
            .params
            .iter()
            .copied()
            .zip(comb.weights.iter().copied())
            .filter(|p| p.1 > 0.0)
            .collect();
        return ConvexCombination::from_pairs(pairs, comb.total);
    }
    if comb.len() <= n {
        return Ok(comb.clone());
    }
    if comb.len() > n + 1 {
        return Err(Error::InvalidInput(format!(
            "expected at most {} terms, got {}",
            n + 1,
            comb.len()
        )));
    }

    let scale = 1.0 + v.amax();
    let incoming = comb.reconstruction_error(curve, v)?;
    if incoming > config.reconstruction * scale {
        return Err(Error::Infeasible { residual: incoming });
    }

    let points: Vec<RealVector> = comb
        .params
        .iter()
        .map(|&t| curve.point(t))
        .collect::<Result<_>>()?;

    let reduced = match build_frame(v, &points[1..], config.rank) {
        Ok(frame) => {
            let crossing = first_zero_crossing(&frame, curve, comb.params[0], comb.params[1], config)?;
            let k = crossing.index;
            let p = &crossing.coords;
            let others: f64 = (0..n).filter(|&j| j != k).map(|j| p[j]).sum();
            let denom = 1.0 - others;
            let mut pairs = Vec::with_capacity(n);
            pairs.push((crossing.t, comb.total / denom));
            for j in (0..n).filter(|&j| j != k) {
                let w = -p[j] / denom;
                let w = if (-WEIGHT_CLIP..0.0).contains(&w) { 0.0 } else { w };
                if w < 0.0 {
                    return Err(Error::Reconstruction { residual: -w });
                }
                pairs.push((comb.params[j + 1], comb.total * w));
            }
            resolve_weights(curve, ConvexCombination::from_pairs(pairs, comb.total)?, v)?
        }
        Err(Error::RankDeficient { .. }) => {
            let mut active: Vec<(usize, f64)> = comb.weights.iter().copied().enumerate().collect();
            if !eliminate_one(&points, &mut active, comb.total) {
                return Err(Error::Reconstruction { residual: f64::NAN });
            }
            let pairs = active.into_iter().map(|(i, w)| (comb.params[i], w)).collect();
            ConvexCombination::from_pairs(pairs, comb.total)?
        }
        Err(e) => return Err(e),
    };

    let residual = reduced.reconstruction_error(curve, v)?;
    if residual > config.reconstruction * scale {
        return Err(Error::Reconstruction { residual });
    }
    Ok(reduced)
}

/// Recomputes the weights of `comb` as the least-squares solution of
/// `sum_i w_i (x(t_i), 1) = (v, 1) * total`. The sliding formula drops the
/// small leftover coordinate at the crossing; the re-solve spreads it over
/// the remaining points instead. Kept only when it is non-negative and
/// reconstructs better.
fn resolve_weights<C: Curve + ?Sized>(curve: &C, comb: ConvexCombination, v: &RealVector) -> Result<ConvexCombination> {
    let n = v.len();
    let mut system = DMatrix::zeros(n + 1, comb.len());
    for (col, &t) in comb.params.iter().enumerate() {
        system.view_mut((0, col), (n, 1)).copy_from(&curve.point(t)?);
        system[(n, col)] = 1.0;
    }
    let mut rhs = RealVector::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from(v);
    rhs[n] = 1.0;
    let w = lstsq(&system, &rhs, 1e-15);
    if w.iter().any(|x| !(*x >= -WEIGHT_CLIP)) {
        return Ok(comb);
    }
    let pairs = comb
        .params
        .iter()
        .zip(w.iter())
        .map(|(&t, &x)| (t, x.max(0.0) * comb.total))
        .collect();
    let candidate = ConvexCombination::from_pairs(pairs, comb.total)?;
    if candidate.reconstruction_error(curve, v)? < comb.reconstruction_error(curve, v)? {
        Ok(candidate)
    } else {
        Ok(comb)
    }
}
