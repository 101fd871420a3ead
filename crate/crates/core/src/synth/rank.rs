use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Result;
use crate::hull::CurveSystem;
use crate::linalg::lstsq;
use crate::measure::{IntervalSpec, MeasureSpec};

/// A function that is an affine combination of the independent ones on the
/// probe set: `x_index = sum_j coefficients[j] * x_{independent[j]} + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dependency {
    pub index: usize,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Largest absolute fit residual over the probe points.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineRankReport {
    pub rank: usize,
    pub independent_indices: Vec<usize>,
    pub dependencies: Vec<Dependency>,
    /// Worst sup-norm fit residual over all dependent functions.
    pub residual_of_fit: f64,
}

/// Probe points carrying mass: midpoints of `cells` equal cells of `window`
/// where the density is positive, followed by every atom inside `window`.
pub(crate) fn support_probes(m: &MeasureSpec, window: &IntervalSpec, cells: usize) -> Result<Vec<f64>> {
    let mut probes = Vec::with_capacity(cells + m.atoms().len());
    if m.density().is_some() {
        let h = window.width() / cells as f64;
        for i in 0..cells {
            let t = window.lower + (i as f64 + 0.5) * h;
            if m.density_at(t)? > 0.0 {
                probes.push(t);
            }
        }
    }
    probes.extend(
        m.atoms()
            .iter()
            .map(|a| a.t)
            .filter(|t| *t >= window.lower && *t <= window.upper),
    );
    Ok(probes)
}

/// Affine rank of the curve sampled where `m` has mass inside `window`.
///
/// Functions are scanned in order; one joins the independent set when its
/// least-squares fit by an affine combination of the functions already
/// chosen leaves a residual larger than `rank_tol` times its own norm.
pub fn affine_rank_on(
    curve: &CurveSystem,
    m: &MeasureSpec,
    window: &IntervalSpec,
    probe_cells: usize,
    rank_tol: f64,
) -> Result<AffineRankReport> {
    let probes = support_probes(m, window, probe_cells)?;
    let n = curve.components().len();
    let rows = probes.len();
    let mut samples = DMatrix::zeros(rows, n);
    for (r, &t) in probes.iter().enumerate() {
        let mut row = vec![0.0; n];
        curve.eval_into(t, &mut row)?;
        for k in 0..n {
            samples[(r, k)] = row[k];
        }
    }

    let mut independent: Vec<usize> = Vec::new();
    let mut fits: Vec<(usize, DVector<f64>, f64)> = Vec::new();
    for k in 0..n {
        let column: DVector<f64> = samples.column(k).into_owned();
        let (coef, residual) = affine_fit(&samples, &independent, &column);
        let norm = column.norm();
        let resid_norm = residual.norm();
        if resid_norm > rank_tol * norm && resid_norm > 0.0 {
            independent.push(k);
        } else {
            fits.push((k, coef, residual.amax()));
        }
    }

    // Refit dependents against the final independent set.
    let mut dependencies = Vec::with_capacity(fits.len());
    let mut worst: f64 = 0.0;
    for (k, _, _) in fits {
        let column: DVector<f64> = samples.column(k).into_owned();
        let (coef, residual) = affine_fit(&samples, &independent, &column);
        let residual = residual.amax();
        worst = worst.max(residual);
        dependencies.push(Dependency {
            index: k,
            coefficients: coef.rows(0, independent.len()).iter().copied().collect(),
            intercept: coef[independent.len()],
            residual,
        });
    }
    Ok(AffineRankReport {
        rank: independent.len(),
        independent_indices: independent,
        dependencies,
        residual_of_fit: worst,
    })
}

/// Least-squares fit of `target` by the selected columns plus a constant.
/// Returns the coefficients (constant last) and the residual vector.
pub(crate) fn affine_fit(samples: &DMatrix<f64>, selected: &[usize], target: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let rows = samples.nrows();
    let mut design = DMatrix::zeros(rows, selected.len() + 1);
    for (j, &k) in selected.iter().enumerate() {
        design.set_column(j, &samples.column(k));
    }
    design.column_mut(selected.len()).fill(1.0);
    let coef = lstsq(&design, target, 1e-14);
    let residual = target - &design * &coef;
    (coef, residual)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(fns: &[&str]) -> AffineRankReport {
        let interval = IntervalSpec::closed(0.0, 1.0).unwrap();
        let curve = CurveSystem::parse(fns, interval).unwrap();
        let m = MeasureSpec::lebesgue(interval);
        affine_rank_on(&curve, &m, &interval, 512, 1e-10).unwrap()
    }

    #[test]
    fn explicit_affine_relation() {
        let r = report(&["t", "2*t+3"]);
        assert_eq!(r.rank, 1);
        assert_eq!(r.independent_indices, vec![0]);
        let dep = &r.dependencies[0];
        assert_eq!(dep.index, 1);
        assert!((dep.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((dep.intercept - 3.0).abs() < 1e-12);
        assert!(r.residual_of_fit <= 1e-8);
    }

    #[test]
    fn moment_curve_is_full_rank() {
        assert_eq!(report(&["t", "t^2"]).rank, 2);
    }

    #[test]
    fn constant_has_rank_zero() {
        let r = report(&["1"]);
        assert_eq!(r.rank, 0);
        assert!((r.dependencies[0].intercept - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dependency_in_the_middle() {
        let r = report(&["t", "t^2", "3*t - t^2", "sin(t)"]);
        assert_eq!(r.independent_indices, vec![0, 1, 3]);
        assert_eq!(r.dependencies.len(), 1);
    }

    #[test]
    fn atoms_only_see_their_support() {
        // On two atoms every function is affine in any non-constant one.
        let interval = IntervalSpec::closed(0.0, 1.0).unwrap();
        let m = MeasureSpec::atomic(
            interval,
            vec![crate::Atom { t: 0.2, mass: 1.0 }, crate::Atom { t: 0.7, mass: 2.0 }],
        )
        .unwrap();
        let curve = CurveSystem::parse(&["t", "t^2", "exp(t)"], interval).unwrap();
        let r = affine_rank_on(&curve, &m, &interval, 512, 1e-10).unwrap();
        assert_eq!(r.rank, 1);
    }
}
