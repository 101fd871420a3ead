use nalgebra::{DMatrix, Dyn, SVD};

use super::{Curve, HullConfig};
use crate::error::{Error, Result};
use crate::linalg::singular_extremes;
use crate::RealVector;

/// Affine coordinates with origin `v` and basis vectors `x(t_j) - v`.
#[derive(Debug, Clone)]
pub struct BarycentricFrame {
    origin: RealVector,
    basis: DMatrix<f64>,
    svd: SVD<f64, Dyn, Dyn>,
}

/// Result of [`first_zero_crossing`]: the parameter, the index of the
/// vanishing coordinate and the full coordinate vector there.
#[derive(Debug, Clone)]
pub struct Crossing {
    pub t: f64,
    pub index: usize,
    pub coords: RealVector,
}

/// Builds the frame at `v` from `n` curve points in `R^n`.
///
/// Fails with [`Error::RankDeficient`] when the smallest singular value of the
/// basis is at most `rank_tol` times the largest.
pub fn build_frame(v: &RealVector, curve_points: &[RealVector], rank_tol: f64) -> Result<BarycentricFrame> {
    let n = v.len();
    if curve_points.len() != n || curve_points.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidInput(format!(
            "a frame in R^{n} needs {n} points of dimension {n}"
        )));
    }
    let mut basis = DMatrix::zeros(n, n);
    for (j, p) in curve_points.iter().enumerate() {
        basis.set_column(j, &(p - v));
    }
    let svd = SVD::new(basis.clone(), true, true);
    let (_, smin, smax) = singular_extremes(&svd);
    if !(smax > 0.0) || smin <= rank_tol * smax {
        let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
        return Err(Error::RankDeficient { ratio });
    }
    Ok(BarycentricFrame {
        origin: v.clone(),
        basis,
        svd,
    })
}

impl BarycentricFrame {
    pub fn origin(&self) -> &RealVector {
        &self.origin
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    /// Coordinates `p` with `basis * p = x - origin`.
    pub fn coords(&self, x: &RealVector) -> RealVector {
        self.svd
            .solve(&(x - &self.origin), 0.0)
            .expect("frame SVD holds both singular bases")
    }

    fn max_coord<C: Curve + ?Sized>(&self, curve: &C, t: f64) -> Result<(f64, RealVector)> {
        let p = self.coords(&curve.point(t)?);
        Ok((p.max(), p))
    }
}

/// First parameter after `t0` where the largest coordinate of `x(t) - v`
/// reaches zero.
///
/// `g(t) = max_j p_j(x(t))` is scanned on a uniform grid over
/// `[t0, t_stop]` for its first non-negative sample, and the bracketing cell
/// is bisected. The grid doubles when the scan finds nothing. Among the
/// coordinates within `crossing` of the maximum at the result, the smallest
/// index is reported.
pub fn first_zero_crossing<C: Curve + ?Sized>(
    frame: &BarycentricFrame,
    curve: &C,
    t0: f64,
    t_stop: f64,
    config: &HullConfig,
) -> Result<Crossing> {
    let no_crossing = || Error::NoCrossing { t0, t_stop };
    if !(t0 < t_stop) {
        return Err(no_crossing());
    }
    let (g0, _) = frame.max_coord(curve, t0)?;
    if g0 >= 0.0 {
        return Err(no_crossing());
    }

    let mut samples = config.scan_samples.max(1);
    let (mut lo, mut hi) = loop {
        let h = (t_stop - t0) / samples as f64;
        let mut prev = t0;
        let mut found = None;
        for i in 1..=samples {
            let t = if i == samples { t_stop } else { t0 + h * i as f64 };
            if frame.max_coord(curve, t)?.0 >= 0.0 {
                found = Some((prev, t));
                break;
            }
            prev = t;
        }
        if let Some(bracket) = found {
            break bracket;
        }
        if samples >= config.max_scan_samples {
            return Err(no_crossing());
        }
        samples *= 2;
    };

    loop {
        let width_floor = config.bisection.max(4.0 * f64::EPSILON * hi.abs().max(lo.abs()));
        if hi - lo <= width_floor {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        if frame.max_coord(curve, mid)?.0 >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    // Prefer the side where every coordinate is still non-positive so the
    // reduced weights come out non-negative.
    let (g_hi, p_hi) = frame.max_coord(curve, hi)?;
    let (t, g, coords) = if g_hi <= 0.0 {
        (hi, g_hi, p_hi)
    } else {
        let (g_lo, p_lo) = frame.max_coord(curve, lo)?;
        (lo, g_lo, p_lo)
    };
    let index = coords
        .iter()
        .position(|p| *p >= g - config.crossing)
        .expect("max is attained");
    Ok(Crossing { t, index, coords })
}
