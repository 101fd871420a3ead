//! Randomized search for a counterexample to the Chebyshev-system property:
//! an increasing tuple `t_1 < ... < t_m` where `det [x_i(t_j)]` vanishes.
//!
//! Finding one disproves the property. Finding none is only evidence.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hull::CurveSystem;

/// Determinants at most this fraction of the Hadamard bound count as zero.
pub const NEAR_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeterminantSample {
    pub tuple: Vec<f64>,
    pub det: f64,
    /// Product of the column norms of `[x_i(t_j)]`, which bounds `|det|`.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChebyshevReport {
    pub seed: u64,
    pub trials: usize,
    /// Sample with the smallest `|det| / scale`.
    pub smallest: Option<DeterminantSample>,
    /// A tuple with `|det| <= NEAR_ZERO * scale`, if one was found.
    pub witness: Option<DeterminantSample>,
    /// False when a witness disproves the property; true means only that
    /// none was found.
    pub no_counterexample: bool,
}

fn sample_at(curve: &CurveSystem, tuple: &[f64]) -> Result<DeterminantSample> {
    let m = tuple.len();
    let mut a = DMatrix::zeros(m, m);
    let mut col = vec![0.0; m];
    for (j, &t) in tuple.iter().enumerate() {
        curve.eval_into(t, &mut col)?;
        for i in 0..m {
            a[(i, j)] = col[i];
        }
    }
    let scale = a.column_iter().map(|c| c.norm()).product();
    let det = a.lu().determinant();
    Ok(DeterminantSample {
        tuple: tuple.to_vec(),
        det,
        scale,
    })
}

fn ratio(s: &DeterminantSample) -> f64 {
    if s.scale > 0.0 {
        s.det.abs() / s.scale
    } else {
        0.0
    }
}

/// Draws `trials` increasing tuples from a seeded ChaCha8 stream. A tuple
/// with a near-zero determinant is a witness directly; otherwise, when two
/// tuples give determinants of opposite sign, the segment between them
/// (which stays inside the set of increasing tuples) is bisected for a zero.
pub fn chebyshev_sample_test(curve: &CurveSystem, trials: usize, seed: u64) -> Result<ChebyshevReport> {
    let interval = curve.interval();
    if !interval.is_compact() {
        return Err(Error::InvalidInput(format!(
            "the determinant test needs a compact interval, got {interval}"
        )));
    }
    let m = curve.components().len();
    let (a, b) = (interval.lower, interval.upper);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut smallest: Option<DeterminantSample> = None;
    let mut witness = None;
    let mut positive: Option<DeterminantSample> = None;
    let mut negative: Option<DeterminantSample> = None;
    let mut tuple = vec![0.0; m];
    let mut drawn = 0;
    while drawn < trials {
        for t in tuple.iter_mut() {
            *t = a + (b - a) * rng.gen::<f64>();
        }
        tuple.sort_by(f64::total_cmp);
        if tuple.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        drawn += 1;
        let s = sample_at(curve, &tuple)?;
        if smallest.as_ref().is_none_or(|best| ratio(&s) < ratio(best)) {
            smallest = Some(s.clone());
        }
        if witness.is_none() && ratio(&s) <= NEAR_ZERO {
            witness = Some(s.clone());
        }
        if s.det > 0.0 && positive.is_none() {
            positive = Some(s);
        } else if s.det < 0.0 && negative.is_none() {
            negative = Some(s);
        }
    }

    if witness.is_none() {
        if let (Some(p), Some(n)) = (&positive, &negative) {
            witness = bisect_segment(curve, p, n)?;
        }
    }
    Ok(ChebyshevReport {
        seed,
        trials,
        smallest,
        no_counterexample: witness.is_none(),
        witness,
    })
}

fn bisect_segment(
    curve: &CurveSystem,
    positive: &DeterminantSample,
    negative: &DeterminantSample,
) -> Result<Option<DeterminantSample>> {
    let point = |s: f64| -> Vec<f64> {
        positive
            .tuple
            .iter()
            .zip(&negative.tuple)
            .map(|(p, n)| p + s * (n - p))
            .collect()
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = positive.clone();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        let s = sample_at(curve, &point(mid))?;
        if ratio(&s) < ratio(&best) {
            best = s.clone();
        }
        if ratio(&best) <= NEAR_ZERO {
            break;
        }
        if s.det > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((ratio(&best) <= NEAR_ZERO).then_some(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::IntervalSpec;

    fn system(fns: &[&str], a: f64, b: f64) -> CurveSystem {
        CurveSystem::parse(fns, IntervalSpec::closed(a, b).unwrap()).unwrap()
    }

    #[test]
    fn affine_pair_is_chebyshev() {
        let r = chebyshev_sample_test(&system(&["1", "t"], 0.0, 1.0), 500, 7).unwrap();
        assert!(r.no_counterexample);
        assert!(r.witness.is_none());
    }

    #[test]
    fn vandermonde_has_no_witness() {
        let r = chebyshev_sample_test(&system(&["1", "t", "t^2"], -1.0, 2.0), 500, 11).unwrap();
        assert!(r.no_counterexample);
    }

    #[test]
    fn odd_monomials_on_symmetric_interval() {
        let r = chebyshev_sample_test(&system(&["t", "t^3"], -1.0, 1.0), 200, 3).unwrap();
        let w = r.witness.expect("det t1 t2 (t2^2 - t1^2) changes sign");
        let (t1, t2) = (w.tuple[0], w.tuple[1]);
        assert!(t1 < t2);
        // Closed form of the determinant.
        assert!((t1 * t2 * (t2 * t2 - t1 * t1)).abs() <= 1e-11);
        assert!(!r.no_counterexample);
    }

    #[test]
    fn same_seed_same_report() {
        let c = system(&["t", "sin(t)", "exp(t)"], 0.0, 2.0);
        assert_eq!(
            chebyshev_sample_test(&c, 300, 42).unwrap(),
            chebyshev_sample_test(&c, 300, 42).unwrap()
        );
    }
}
