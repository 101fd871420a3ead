//! Globally adaptive Gauss-Kronrod (7, 15) integration of vector integrands.
//!
//! All components share the same panels. The per-panel error estimate is the
//! plain difference between the 15-point Kronrod and the embedded 7-point
//! Gauss results; the panel with the largest scaled error is bisected until
//! every component meets its tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae on [-1, 1], descending; odd indices are the Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

pub(crate) const MAX_PANELS: usize = 20_000;
const INITIAL_PANELS: usize = 4;

/// Integrand writing `dim` component values at `t` into the output slice.
pub(crate) trait Integrand {
    fn dim(&self) -> usize;
    fn eval(&mut self, t: f64, out: &mut [f64]) -> Result<()>;
}

impl<F> Integrand for (usize, F)
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&mut self, t: f64, out: &mut [f64]) -> Result<()> {
        (self.1)(t, out)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Estimate {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

/// One 15-point Kronrod evaluation with its 7-point Gauss companion.
pub(crate) fn gauss_kronrod<I: Integrand>(
    f: &mut I,
    a: f64,
    b: f64,
    buf: &mut [f64],
) -> Result<Estimate> {
    let dim = f.dim();
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];

    f.eval(center, buf)?;
    for k in 0..dim {
        kronrod[k] = WGK[7] * buf[k];
        gauss[k] = WG[3] * buf[k];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        for t in [center - dx, center + dx] {
            f.eval(t, buf)?;
            for k in 0..dim {
                kronrod[k] += WGK[j] * buf[k];
                if j % 2 == 1 {
                    gauss[k] += WG[j / 2] * buf[k];
                }
            }
        }
    }
    let errors = kronrod
        .iter()
        .zip(&gauss)
        .map(|(k, g)| (half * (k - g)).abs())
        .collect();
    let values = kronrod.iter().map(|k| half * k).collect();
    Ok(Estimate { values, errors })
}

struct Panel {
    a: f64,
    b: f64,
    est: Estimate,
    priority: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Integrates over the finite interval `[a, b]`.
///
/// Component `k` is accepted once its summed error estimate is at most
/// `tol * (scale[k] + |value[k]|)`.
pub(crate) fn integrate<I: Integrand>(
    f: &mut I,
    a: f64,
    b: f64,
    tol: f64,
    scale: &[f64],
) -> Result<Estimate> {
    let dim = f.dim();
    debug_assert_eq!(scale.len(), dim);
    let mut buf = vec![0.0; dim];

    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Panel> = Vec::new();
    let mut initial = Vec::with_capacity(INITIAL_PANELS);
    let width = (b - a) / INITIAL_PANELS as f64;
    for i in 0..INITIAL_PANELS {
        let lo = a + width * i as f64;
        let hi = if i + 1 == INITIAL_PANELS { b } else { a + width * (i + 1) as f64 };
        initial.push((lo, hi, gauss_kronrod(f, lo, hi, &mut buf)?));
    }
    let mut weight = vec![0.0; dim];
    for k in 0..dim {
        let first: f64 = initial.iter().map(|(_, _, e)| e.values[k]).sum();
        weight[k] = 1.0 / (scale[k] + first.abs());
    }
    let priority = |est: &Estimate| {
        est.errors
            .iter()
            .zip(&weight)
            .map(|(e, w)| e * w)
            .fold(0.0, f64::max)
    };
    for (lo, hi, est) in initial {
        let p = priority(&est);
        heap.push(Panel { a: lo, b: hi, est, priority: p });
    }

    let mut count = INITIAL_PANELS;
    let mut value = vec![0.0; dim];
    let mut error = vec![0.0; dim];
    loop {
        value.iter_mut().for_each(|v| *v = 0.0);
        error.iter_mut().for_each(|v| *v = 0.0);
        for p in heap.iter().chain(frozen.iter()) {
            for k in 0..dim {
                value[k] += p.est.values[k];
                error[k] += p.est.errors[k];
            }
        }
        let converged = (0..dim).all(|k| error[k] <= tol * (scale[k] + value[k].abs()));
        if converged {
            break;
        }
        if count >= MAX_PANELS {
            return Err(non_convergence(a, b, &error));
        }
        // Refine several panels per pass to amortize the re-summation.
        let batch = (heap.len() / 8).max(1);
        let mut refined = 0;
        while refined < batch {
            let Some(worst) = heap.pop() else {
                return Err(non_convergence(a, b, &error));
            };
            let mid = 0.5 * (worst.a + worst.b);
            if !(mid > worst.a && mid < worst.b) {
                frozen.push(worst);
                continue;
            }
            for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
                let est = gauss_kronrod(f, lo, hi, &mut buf)?;
                let p = priority(&est);
                heap.push(Panel { a: lo, b: hi, est, priority: p });
            }
            count += 1;
            refined += 1;
        }
    }

    let mut panels: Vec<Panel> = heap.into_vec();
    panels.extend(frozen);
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut values = vec![0.0; dim];
    let mut errors = vec![0.0; dim];
    for p in &panels {
        for k in 0..dim {
            values[k] += p.est.values[k];
            errors[k] += p.est.errors[k];
        }
    }
    Ok(Estimate { values, errors })
}

fn non_convergence(a: f64, b: f64, error: &[f64]) -> Error {
    Error::NonConvergence {
        lower: a,
        upper: b,
        error: error.iter().copied().fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar<F: FnMut(f64) -> f64>(mut g: F) -> (usize, impl FnMut(f64, &mut [f64]) -> Result<()>) {
        (1, move |t: f64, out: &mut [f64]| {
            out[0] = g(t);
            Ok(())
        })
    }

    #[test]
    fn kronrod_exact_through_degree_22() {
        // Oracle: closed-form monomial integrals over [-1, 2].
        for degree in 0..=22 {
            let mut f = scalar(|t| t.powi(degree));
            let est = gauss_kronrod(&mut f, -1.0, 2.0, &mut [0.0]).unwrap();
            let exact = (2f64.powi(degree + 1) - (-1f64).powi(degree + 1)) / (degree + 1) as f64;
            assert!(
                (est.values[0] - exact).abs() <= 1e-12 * exact.abs().max(1.0),
                "degree {degree}"
            );
        }
    }

    #[test]
    fn gauss_companion_exact_through_degree_13() {
        for degree in 0..=13 {
            let mut f = scalar(|t| t.powi(degree));
            let est = gauss_kronrod(&mut f, 0.0, 1.0, &mut [0.0]).unwrap();
            assert!(est.errors[0] < 1e-14, "degree {degree}: {}", est.errors[0]);
        }
        let mut f = scalar(|t| t.powi(14));
        let est = gauss_kronrod(&mut f, 0.0, 1.0, &mut [0.0]).unwrap();
        assert!(est.errors[0] > 1e-10);
    }

    #[test]
    fn adaptive_oscillatory_and_peaked() {
        let mut f = scalar(|t| (30.0 * t).sin());
        let est = integrate(&mut f, 0.0, 3.0, 1e-12, &[1.0]).unwrap();
        let exact = (1.0 - (90.0f64).cos()) / 30.0;
        assert!((est.values[0] - exact).abs() < 1e-12);

        let mut g = scalar(|t| 1.0 / (1e-4 + (t - 0.3).powi(2)));
        let est = integrate(&mut g, 0.0, 1.0, 1e-10, &[1.0]).unwrap();
        let exact = 100.0 * ((0.7f64 / 1e-2).atan() + (0.3f64 / 1e-2).atan());
        assert!((est.values[0] - exact).abs() <= 1e-10 * (1.0 + exact));
    }

    #[test]
    fn endpoint_singularity_never_evaluated() {
        let mut f = scalar(|t| 1.0 / t.sqrt());
        let est = integrate(&mut f, 0.0, 1.0, 1e-8, &[1.0]).unwrap();
        assert!((est.values[0] - 2.0).abs() < 1e-7);
    }

    #[test]
    fn reports_non_convergence() {
        let mut f = scalar(|t| 1.0 / t);
        assert!(matches!(
            integrate(&mut f, 0.0, 1.0, 1e-10, &[1.0]),
            Err(Error::NonConvergence { .. })
        ));
    }
}
