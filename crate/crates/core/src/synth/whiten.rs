use nalgebra::{DMatrix, SVD};

use crate::error::Result;
use crate::hull::{Curve, CurveSystem};
use crate::linalg::{null_vector, singular_extremes};
use crate::RealVector;

/// The affine map `x -> T (x - center)` that gives weighted samples unit
/// spread in every direction. Convex combinations commute with it.
#[derive(Debug, Clone)]
pub(crate) struct Whitening {
    pub center: RealVector,
    pub transform: DMatrix<f64>,
    /// Rounding level of whitened points: machine epsilon times `|T|` times
    /// the largest sample norm.
    pub noise: f64,
    /// Coordinate weighing most in the thinnest direction of the samples.
    pub thinnest: usize,
}

impl Whitening {
    pub fn apply(&self, x: &RealVector) -> RealVector {
        &self.transform * (x - &self.center)
    }
}

/// A direction in which the weighted samples have (numerically) no spread
/// around the center, and the coordinate it weighs most after scaling.
#[derive(Debug, Clone)]
pub(crate) struct Flat {
    pub normal: RealVector,
    pub dominant: usize,
}

/// Whitening of `points` around `center`, or the flat direction when the
/// smallest singular value of the weighted, column-scaled, centered samples
/// is at most `rank_tol` times the largest.
pub(crate) fn whiten(
    points: &[RealVector],
    weights: &[f64],
    center: &RealVector,
    rank_tol: f64,
) -> std::result::Result<Whitening, Flat> {
    let n = center.len();
    let active: Vec<usize> = (0..points.len()).filter(|&i| weights[i] > 0.0).collect();
    let wsum: f64 = active.iter().map(|&i| weights[i]).sum();
    let mut b = DMatrix::zeros(active.len(), n);
    for (r, &i) in active.iter().enumerate() {
        let root = (weights[i] / wsum).sqrt();
        for k in 0..n {
            b[(r, k)] = root * (points[i][k] - center[k]);
        }
    }
    let spread: Vec<f64> = (0..n).map(|k| b.column(k).norm()).collect();
    let widest = spread.iter().copied().fold(0.0, f64::max);
    for k in 0..n {
        if spread[k] <= rank_tol * widest.max(center[k].abs()) {
            return Err(Flat {
                normal: RealVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 }),
                dominant: k,
            });
        }
    }
    for k in 0..n {
        b.column_mut(k).scale_mut(1.0 / spread[k]);
    }
    let flat = |v: RealVector| {
        let dominant = v.iamax();
        let mut normal = RealVector::from_fn(n, |k, _| v[k] / spread[k]);
        normal /= normal.norm();
        Flat { normal, dominant }
    };
    if active.len() < n {
        return Err(flat(null_vector(&b)));
    }
    let svd = SVD::new(b, false, true);
    let (imin, smin, smax) = singular_extremes(&svd);
    let v_t = svd.v_t.expect("requested right singular vectors");
    if smin <= rank_tol * smax {
        return Err(flat(v_t.row(imin).transpose()));
    }
    let thinnest = v_t.row(imin).transpose().iamax();
    // T = S^-1 V^T D^-1 with D the column scaling.
    let mut transform = v_t;
    for (r, s) in svd.singular_values.iter().enumerate() {
        transform.row_mut(r).scale_mut(1.0 / s);
    }
    for k in 0..n {
        transform.column_mut(k).scale_mut(1.0 / spread[k]);
    }
    let largest = points.iter().map(|x| x.norm()).fold(center.norm(), f64::max);
    let noise = f64::EPSILON * transform.norm() * largest;
    Ok(Whitening {
        center: center.clone(),
        transform,
        noise,
        thinnest,
    })
}

/// `t -> T (x(t) - center)`.
pub(crate) struct WhitenedCurve<'a> {
    pub curve: &'a CurveSystem,
    pub whitening: &'a Whitening,
}

impl Curve for WhitenedCurve<'_> {
    fn dim(&self) -> usize {
        self.whitening.center.len()
    }

    fn point(&self, t: f64) -> Result<RealVector> {
        Ok(self.whitening.apply(&self.curve.point(t)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitened_samples_have_unit_spread() {
        let pts: Vec<RealVector> = [(0.0, 0.0), (1.0, 1e-3), (2.0, -1e-3), (3.0, 2e-3)]
            .iter()
            .map(|&(a, b)| RealVector::from_vec(vec![a, b]))
            .collect();
        let w = [0.25; 4];
        let mut mean = RealVector::zeros(2);
        for p in &pts {
            mean += p * 0.25;
        }
        let wh = whiten(&pts, &w, &mean, 1e-10).unwrap();
        let mut cov = DMatrix::<f64>::zeros(2, 2);
        for p in &pts {
            let y = wh.apply(p);
            cov.ger(0.25, &y, &y, 1.0);
        }
        assert!((cov - DMatrix::identity(2, 2)).amax() < 1e-12);
    }
}
