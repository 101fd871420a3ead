//! Convex combinations of curve points.
//!
//! [`caratheodory_finite`] thins a large finite combination down to at most
//! `n + 1` points of `R^n`. [`reduce_on_curve`] goes one step further for a
//! continuous curve: starting from `n + 1` ordered curve points it slides the
//! first point along the curve until one barycentric coordinate vanishes,
//! leaving a combination of at most `n` curve points.

mod caratheodory;
mod curve;
mod frame;
mod reduce;

pub use caratheodory::{caratheodory_finite, Selection};
pub use curve::{Curve, CurveSystem, FnCurve};
pub use frame::{build_frame, first_zero_crossing, BarycentricFrame, Crossing};
pub use reduce::reduce_on_curve;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::RealVector;

/// Numerical settings shared by the hull operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HullConfig {
    /// Relative reconstruction tolerance for reduced combinations.
    pub reconstruction: f64,
    /// A frame is singular when its smallest singular value is below this
    /// fraction of the largest.
    pub rank: f64,
    /// Bisection stops once the bracket is this narrow in `t`.
    pub bisection: f64,
    /// Coordinates within this distance of zero count as vanishing.
    pub crossing: f64,
    /// Initial number of scan intervals for the crossing search.
    pub scan_samples: usize,
    /// Upper bound on scan intervals after doubling.
    pub max_scan_samples: usize,
}

impl Default for HullConfig {
    fn default() -> Self {
        Self {
            reconstruction: 1e-9,
            rank: 1e-10,
            bisection: 1e-13,
            crossing: 1e-11,
            scan_samples: 4096,
            max_scan_samples: 1 << 20,
        }
    }
}

/// Weights below this magnitude (relative to the total) are roundoff.
pub const WEIGHT_CLIP: f64 = 1e-12;

/// `sum_i weights[i] * x(params[i])` with non-negative weights.
///
/// Parameters are strictly increasing; `total` is the weight sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexCombination {
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
    pub total: f64,
}

impl ConvexCombination {
    /// Sorts by parameter and merges repeated parameters.
    pub fn new(params: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if params.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} parameters but {} weights",
                params.len(),
                weights.len()
            )));
        }
        if params.is_empty() {
            return Err(Error::InvalidInput("empty combination".into()));
        }
        if let Some(t) = params.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite parameter {t}")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidInput(format!("weight {w} is negative or non-finite")));
        }
        let mut pairs: Vec<(f64, f64)> = params.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut params: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (t, w) in pairs {
            if params.last() == Some(&t) {
                *weights.last_mut().expect("parallel vectors") += w;
            } else {
                params.push(t);
                weights.push(w);
            }
        }
        let total = weights.iter().sum();
        Ok(Self {
            params,
            weights,
            total,
        })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// `sum_i weights[i] * x(params[i])`.
    pub fn combine<C: Curve + ?Sized>(&self, curve: &C) -> Result<RealVector> {
        let mut acc = RealVector::zeros(curve.dim());
        for (&t, &w) in self.params.iter().zip(&self.weights) {
            acc += curve.point(t)? * w;
        }
        Ok(acc)
    }

    /// The normalized mean `combine(curve) / total`.
    pub fn mean<C: Curve + ?Sized>(&self, curve: &C) -> Result<RealVector> {
        Ok(self.combine(curve)? / self.total)
    }

    /// `|sum_i w_i x(t_i) - total * v|_inf / total`.
    pub fn reconstruction_error<C: Curve + ?Sized>(&self, curve: &C, v: &RealVector) -> Result<f64> {
        let diff = self.combine(curve)? - v * self.total;
        Ok(diff.amax() / self.total)
    }

    /// Checks the structural invariants: non-negative weights summing to
    /// `total`, strictly increasing parameters.
    pub fn check_invariants(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput("negative weight".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - self.total).abs() > 1e-12 * self.total.abs() {
            return Err(Error::InvalidInput(format!("weights sum to {sum}, total is {}", self.total)));
        }
        if self.params.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("parameters are not strictly increasing".into()));
        }
        Ok(())
    }

    /// Drops zero weights and rescales so the weights sum to exactly
    /// `total`.
    pub(crate) fn from_pairs(pairs: Vec<(f64, f64)>, total: f64) -> Result<Self> {
        let (params, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().filter(|p| p.1 > 0.0).unzip();
        let mut comb = Self::new(params, weights)?;
        let factor = total / comb.total;
        comb.weights.iter_mut().for_each(|w| *w *= factor);
        comb.total = total;
        Ok(comb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_and_sorts() {
        let c = ConvexCombination::new(vec![0.5, 0.1, 0.5], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c.params, vec![0.1, 0.5]);
        assert_eq!(c.weights, vec![2.0, 4.0]);
        assert_eq!(c.total, 6.0);
        c.check_invariants().unwrap();
        assert!(ConvexCombination::new(vec![0.0], vec![-1.0]).is_err());
        assert!(ConvexCombination::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn json_shape() {
        let c = ConvexCombination::new(vec![0.0, 1.0], vec![0.25, 0.75]).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(text, r#"{"params":[0.0,1.0],"weights":[0.25,0.75],"total":1.0}"#);
    }
}
