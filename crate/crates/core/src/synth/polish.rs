use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::hull::Curve;
use crate::linalg::lstsq;
use crate::measure::IntervalSpec;
use crate::RealVector;

#[derive(Debug, Clone)]
pub(crate) struct Polished {
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
    /// Euclidean norm of the scaled residual at the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

/// Scaled residual `((sum_i w_i x_k(t_i) - mean_k) / (1 + |mean_k|), sum_i w_i - 1)`.
fn residual_map<C: Curve + ?Sized>(curve: &C, params: &[f64], weights: &[f64], mean: &RealVector) -> Result<DVector<f64>> {
    let n = mean.len();
    let mut acc = RealVector::zeros(n);
    for (&t, &w) in params.iter().zip(weights) {
        acc.axpy(w, &curve.point(t)?, 1.0);
    }
    let mut r = DVector::zeros(n + 1);
    for k in 0..n {
        r[k] = (acc[k] - mean[k]) / (1.0 + mean[k].abs());
    }
    r[n] = weights.iter().sum::<f64>() - 1.0;
    Ok(r)
}

fn jacobian<C: Curve + ?Sized>(
    curve: &C,
    interval: &IntervalSpec,
    params: &[f64],
    weights: &[f64],
    mean: &RealVector,
) -> Result<DMatrix<f64>> {
    let n = mean.len();
    let q = params.len();
    let mut jac = DMatrix::zeros(n + 1, 2 * q);
    for (i, (&t, &w)) in params.iter().zip(weights).enumerate() {
        let x = curve.point(t)?;
        let h = 1e-6 * (1.0 + t.abs());
        let (a, b) = (interval.project(t - h), interval.project(t + h));
        let (lo, hi) = (curve.point(a)?, curve.point(b)?);
        for k in 0..n {
            let s = 1.0 / (1.0 + mean[k].abs());
            jac[(k, i)] = if b > a { w * (hi[k] - lo[k]) / (b - a) * s } else { 0.0 };
            jac[(k, q + i)] = x[k] * s;
        }
        jac[(n, q + i)] = 1.0;
    }
    Ok(jac)
}

/// Damped Gauss-Newton on nodes and weights. Steps are minimum-norm
/// least-squares solutions, halved until the residual norm decreases; each
/// trial is projected to `weights >= 0` and nodes in `interval`. A node
/// whose weight is projected to zero is removed and the solve restarts.
pub(crate) fn polish<C: Curve + ?Sized>(
    curve: &C,
    interval: &IntervalSpec,
    params: &[f64],
    weights: &[f64],
    mean: &RealVector,
    max_iter: usize,
    tol: f64,
) -> Result<Polished> {
    let mut params = params.to_vec();
    let mut weights = weights.to_vec();
    let mut r = residual_map(curve, &params, &weights, mean)?;
    let mut norm = r.norm();
    let mut iter = 0;
    while norm >= tol && iter < max_iter {
        iter += 1;
        let q = params.len();
        let jac = jacobian(curve, interval, &params, &weights, mean)?;
        let step = lstsq(&jac, &(-&r), 1e-14);

        let mut s = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial_t: Vec<f64> = (0..q).map(|i| interval.project(params[i] + s * step[i])).collect();
            let trial_w: Vec<f64> = (0..q).map(|i| (weights[i] + s * step[q + i]).max(0.0)).collect();
            if let Ok(rt) = residual_map(curve, &trial_t, &trial_w, mean) {
                let nt = rt.norm();
                if nt < norm {
                    accepted = Some((trial_t, trial_w, rt, nt));
                    break;
                }
            }
            s *= 0.5;
        }
        let Some((t_new, w_new, r_new, n_new)) = accepted else {
            break;
        };
        if w_new.iter().any(|w| *w == 0.0) && w_new.iter().any(|w| *w > 0.0) {
            let keep: Vec<usize> = (0..q).filter(|&i| w_new[i] > 0.0).collect();
            params = keep.iter().map(|&i| t_new[i]).collect();
            weights = keep.iter().map(|&i| w_new[i]).collect();
            r = residual_map(curve, &params, &weights, mean)?;
            norm = r.norm();
        } else {
            params = t_new;
            weights = w_new;
            r = r_new;
            norm = n_new;
        }
    }
    Ok(Polished {
        params,
        weights,
        residual: norm,
        converged: norm < tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::CurveSystem;

    #[test]
    fn moves_a_perturbed_midpoint_rule_back() {
        let i = IntervalSpec::closed(0.0, 1.0).unwrap();
        let curve = CurveSystem::parse(&["t"], i).unwrap();
        let mean = RealVector::from_element(1, 0.5);
        let out = polish(&curve, &i, &[0.49], &[1.0 + 1e-6], &mean, 200, 1e-12).unwrap();
        assert!(out.converged);
        assert!((out.params[0] - 0.5).abs() < 1e-11);
        assert!((out.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_rule_for_moments() {
        let i = IntervalSpec::closed(0.0, 1.0).unwrap();
        let curve = CurveSystem::parse(&["t", "t^2"], i).unwrap();
        let mean = RealVector::from_vec(vec![0.5, 1.0 / 3.0]);
        let out = polish(&curve, &i, &[0.2, 0.8], &[0.5, 0.5], &mean, 200, 1e-12).unwrap();
        assert!(out.converged, "{}", out.residual);
        assert!(out.weights.iter().all(|w| *w >= 0.0));
        assert!(out.params.iter().all(|t| (0.0..=1.0).contains(t)));
    }
}
