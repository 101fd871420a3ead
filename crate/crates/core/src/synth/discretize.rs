use nalgebra::DMatrix;

use super::whiten::{whiten, Flat};
use crate::error::{Error, Result};
use crate::hull::CurveSystem;
use crate::linalg::lstsq;
use crate::measure::adaptive::gauss_kronrod;
use crate::measure::{IntervalSpec, MeasureSpec};
use crate::RealVector;

/// A finite combination of curve points: `sum_i weights[i] * points[i]`,
/// with `points[i] = x(params[i])`.
#[derive(Debug, Clone)]
pub struct HullSample {
    pub params: Vec<f64>,
    pub points: Vec<RealVector>,
    pub weights: Vec<f64>,
    /// Number of density cells used; 0 for a purely atomic measure.
    pub grid: usize,
}

/// Verdict of [`interiority_check`].
#[derive(Debug, Clone, PartialEq)]
pub enum Interiority {
    Interior,
    /// The samples lie (numerically) in the hyperplane `normal . (x - J) = 0`.
    /// `dominant` is the coordinate with the largest normal component after
    /// the samples are scaled to unit spread.
    Boundary { normal: RealVector, dominant: usize },
}

/// Left-endpoint integral sum: the point `x(s_i)` for each of `grid` equal
/// cells of `window` carries the density mass of `[s_i, s_{i+1})`, and
/// every atom in `window` is a point of its own. Weights are divided by
/// `mass`.
pub fn integral_sum(
    curve: &CurveSystem,
    m: &MeasureSpec,
    window: &IntervalSpec,
    grid: usize,
    mass: f64,
) -> Result<HullSample> {
    let n = curve.components().len();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut used_grid = 0;
    if m.density().is_some() {
        used_grid = grid;
        let h = window.width() / grid as f64;
        let mut buf = [0.0];
        let mut density = (1, |t: f64, out: &mut [f64]| -> Result<()> {
            out[0] = m.density_at(t)?;
            Ok(())
        });
        for i in 0..grid {
            let a = window.lower + h * i as f64;
            let b = if i + 1 == grid { window.upper } else { window.lower + h * (i + 1) as f64 };
            let cell = gauss_kronrod(&mut density, a, b, &mut buf)?.values[0];
            if cell > 0.0 {
                cells.push((a, cell / mass));
            }
        }
    }
    for atom in m.atoms() {
        if atom.t >= window.lower && atom.t <= window.upper {
            cells.push((atom.t, atom.mass / mass));
        }
    }
    cells.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut sample = HullSample {
        params: Vec::with_capacity(cells.len()),
        points: Vec::with_capacity(cells.len()),
        weights: Vec::with_capacity(cells.len()),
        grid: used_grid,
    };
    let mut row = vec![0.0; n];
    for (t, w) in cells {
        curve.eval_into(t, &mut row)?;
        sample.params.push(t);
        sample.points.push(RealVector::from_column_slice(&row));
        sample.weights.push(w);
    }
    Ok(sample)
}

/// A combination of curve points with non-negative weights summing to one
/// whose mean is `mean` to within `correction * (1 + |mean|_inf)`.
///
/// Starts from [`integral_sum`] with `grid` cells and doubles the grid up to
/// `max_grid` until the raw weights can be corrected.
pub fn discretize_hull_point(
    curve: &CurveSystem,
    m: &MeasureSpec,
    window: &IntervalSpec,
    mean: &RealVector,
    mass: f64,
    grid: usize,
    max_grid: usize,
    correction: f64,
) -> Result<HullSample> {
    let tol = correction * (1.0 + mean.amax());
    discretize_mapped(curve, m, window, mean, mass, grid, max_grid, tol, |x| x)
}

/// [`discretize_hull_point`] with every point passed through `map` before
/// the correction, which then targets `target` to within `tol`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn discretize_mapped(
    curve: &CurveSystem,
    m: &MeasureSpec,
    window: &IntervalSpec,
    target: &RealVector,
    mass: f64,
    grid: usize,
    max_grid: usize,
    tol: f64,
    map: impl Fn(RealVector) -> RealVector,
) -> Result<HullSample> {
    let mut grid = grid.max(target.len() + 2);
    loop {
        let mut sample = integral_sum(curve, m, window, grid, mass)?;
        sample.points = sample.points.into_iter().map(&map).collect();
        if let Some(w) = correct_weights(&sample.points, &sample.weights, target, tol) {
            sample.weights = w;
            return Ok(sample);
        }
        if m.density().is_none() || grid * 2 > max_grid {
            return Err(Error::DiscretizationCap { grid });
        }
        grid *= 2;
    }
}

/// Adjusts `weights` so that they sum to one and reproduce `mean`.
///
/// The first attempt is the smallest change in the `sum dw_i^2 / w_i` sense,
/// `w_i <- w_i (1 + a_i . y)` with `a_i = (x_i - mean, 1)`; weights that turn
/// negative are zeroed and the solve repeated. If that fails, the weights are
/// exponentially tilted, `w_i <- w_i exp(alpha . (x_i - mean))`, which stays
/// positive and succeeds whenever `mean` is interior to the hull of the
/// points.
pub(crate) fn correct_weights(points: &[RealVector], weights: &[f64], mean: &RealVector, tol: f64) -> Option<Vec<f64>> {
    if let Some(w) = least_change(points, weights, mean, tol) {
        return Some(w);
    }
    let tilted = tilt(points, weights, mean, tol)?;
    least_change(points, &tilted, mean, tol)
}

fn residual(points: &[RealVector], weights: &[f64], mean: &RealVector) -> RealVector {
    let n = mean.len();
    let mut r = RealVector::zeros(n + 1);
    for (x, &w) in points.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for k in 0..n {
            r[k] += w * (x[k] - mean[k]);
        }
        r[n] += w;
    }
    r[n] -= 1.0;
    r
}

fn least_change(points: &[RealVector], weights: &[f64], mean: &RealVector, tol: f64) -> Option<Vec<f64>> {
    let n = mean.len();
    let mut w = weights.to_vec();
    for _ in 0..30 {
        let r = residual(points, &w, mean);
        if r.amax() <= tol {
            return Some(w);
        }
        let mut gram = DMatrix::zeros(n + 1, n + 1);
        let mut a = RealVector::zeros(n + 1);
        for (x, &wi) in points.iter().zip(&w) {
            if wi == 0.0 {
                continue;
            }
            for k in 0..n {
                a[k] = x[k] - mean[k];
            }
            a[n] = 1.0;
            gram.ger(wi, &a, &a, 1.0);
        }
        let y = lstsq(&gram, &(-r), 1e-15);
        for (x, wi) in points.iter().zip(w.iter_mut()) {
            if *wi == 0.0 {
                continue;
            }
            let mut dot = y[n];
            for k in 0..n {
                dot += y[k] * (x[k] - mean[k]);
            }
            *wi *= 1.0 + dot;
            if *wi < 0.0 {
                *wi = 0.0;
            }
        }
    }
    let r = residual(points, &w, mean);
    (r.amax() <= tol).then_some(w)
}

fn tilt(points: &[RealVector], weights: &[f64], mean: &RealVector, tol: f64) -> Option<Vec<f64>> {
    let n = mean.len();
    let active: Vec<usize> = (0..points.len()).filter(|&i| weights[i] > 0.0).collect();
    let total: f64 = active.iter().map(|&i| weights[i]).sum();
    // Work in coordinates scaled to unit weighted spread.
    let mut scale = vec![0.0; n];
    for &i in &active {
        for k in 0..n {
            scale[k] += weights[i] / total * (points[i][k] - mean[k]).powi(2);
        }
    }
    if scale.iter().any(|s| !(*s > 0.0)) {
        return None;
    }
    let scale: Vec<f64> = scale.iter().map(|s| s.sqrt()).collect();
    let a: Vec<RealVector> = active
        .iter()
        .map(|&i| RealVector::from_fn(n, |k, _| (points[i][k] - mean[k]) / scale[k]))
        .collect();
    let base: Vec<f64> = active.iter().map(|&i| (weights[i] / total).ln()).collect();

    let log_partition = |alpha: &RealVector| -> (f64, Vec<f64>) {
        let z: Vec<f64> = a.iter().zip(&base).map(|(ai, b)| b + alpha.dot(ai)).collect();
        let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|zi| (zi - zmax).exp()).sum();
        let p = z.iter().map(|zi| (zi - zmax).exp() / sum).collect();
        (zmax + sum.ln(), p)
    };

    let mut alpha = RealVector::zeros(n);
    let (mut phi, mut p) = log_partition(&alpha);
    let scaled_tol = tol / scale.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for _ in 0..200 {
        let mut g = RealVector::zeros(n);
        for (ai, pi) in a.iter().zip(&p) {
            g.axpy(*pi, ai, 1.0);
        }
        if g.amax() <= 0.1 * scaled_tol {
            break;
        }
        let mut hess = DMatrix::zeros(n, n);
        for (ai, pi) in a.iter().zip(&p) {
            let d = ai - &g;
            hess.ger(*pi, &d, &d, 1.0);
        }
        let step = lstsq(&hess, &(-&g), 1e-15);
        let slope = g.dot(&step);
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &alpha + &step * s;
            let (phi_t, p_t) = log_partition(&trial);
            if phi_t.is_finite() && phi_t <= phi + 1e-4 * s * slope {
                alpha = trial;
                phi = phi_t;
                p = p_t;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let mut w = vec![0.0; points.len()];
    for (&i, pi) in active.iter().zip(&p) {
        w[i] = *pi;
    }
    Some(w)
}

/// Decides whether `J / total` is interior to the hull of the weighted
/// samples, using the smallest singular value of the mass-weighted samples
/// centered at `J / total`, each coordinate scaled to unit spread.
pub fn interiority_check(
    points: &[RealVector],
    weights: &[f64],
    j: &RealVector,
    total: f64,
    rank_tol: f64,
) -> Interiority {
    match whiten(points, weights, &(j / total), rank_tol) {
        Ok(_) => Interiority::Interior,
        Err(Flat { normal, dominant }) => Interiority::Boundary { normal, dominant },
    }
}
