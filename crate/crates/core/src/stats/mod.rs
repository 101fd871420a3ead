//! Covariance of `f(X)` and `g(X)` for `X ~ mu / mu(I)`: two-point
//! representations and the Grüss bound.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::hull::CurveSystem;
use crate::measure::{IntervalSpec, MeasureSpec, MAX_EXHAUSTION_STEPS};
use crate::synth::{synthesize_rule, SynthConfig};

/// Tolerance for the moments behind [`covariance`].
pub const MOMENT_TOL: f64 = 1e-11;

/// Points `t1, t2` with `Cov(f(X), g(X)) = (f(t1) - f(t2)) (g(t1) - g(t2)) / 4`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceWitness {
    pub t1: f64,
    pub t2: f64,
    pub covariance: f64,
    /// `(f(t1) - f(t2)) (g(t1) - g(t2)) / 4`.
    pub product_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrussReport {
    pub covariance: f64,
    #[serde(rename = "m_f")]
    pub min_f: f64,
    #[serde(rename = "M_f")]
    pub max_f: f64,
    #[serde(rename = "m_g")]
    pub min_g: f64,
    #[serde(rename = "M_g")]
    pub max_g: f64,
    /// `(M_f - m_f) (M_g - m_g) / 4`.
    pub bound: f64,
    /// `bound - |covariance|`.
    pub slack: f64,
}

/// The discrete inequality `|sum p u v - sum p u sum p v| <= (U - u)(V - v) / 4`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteGrussReport {
    pub lhs: f64,
    pub bound: f64,
    pub slack: f64,
    pub covariance: f64,
    #[serde(rename = "m_u")]
    pub min_u: f64,
    #[serde(rename = "M_u")]
    pub max_u: f64,
    #[serde(rename = "m_v")]
    pub min_v: f64,
    #[serde(rename = "M_v")]
    pub max_v: f64,
}

/// Longest sequence accepted by [`gruss_discrete`].
pub const MAX_SEQUENCE_LEN: usize = 1_000_000;

struct Moments {
    mean_f: f64,
    mean_g: f64,
    covariance: f64,
}

fn moments(f: &Expression, g: &Expression, m: &MeasureSpec) -> Result<Moments> {
    // Second moments are integrated too, so non-square-integrable inputs fail.
    let fns = [f.clone(), g.clone(), f.mul(g), f.mul(f), g.mul(g)];
    let raw = m.moments(&fns, MOMENT_TOL).map_err(|e| match e {
        Error::NonConvergence { .. } | Error::Exhaustion(_) => Error::DivergentMass(format!("moments of f and g: {e}")),
        other => other,
    })?;
    let mass = raw.mass;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::DivergentMass(format!("mu(I) = {mass}")));
    }
    let e: Vec<f64> = raw.values.iter().map(|v| v / mass).collect();
    Ok(Moments {
        mean_f: e[0],
        mean_g: e[1],
        covariance: e[2] - e[0] * e[1],
    })
}

/// `E f(X) g(X) - E f(X) E g(X)` for `X` distributed as `mu / mu(I)`.
pub fn covariance(f: &Expression, g: &Expression, m: &MeasureSpec) -> Result<f64> {
    Ok(moments(f, g, m)?.covariance)
}

/// Two points realizing the covariance as a quarter product of differences.
///
/// A rule with at most two nodes for `((f - F)(g - G), f)` gives
/// `Cov = l (1 - l) (f(t1) - f(t2)) (g(t1) - g(t2))`. Since `l (1 - l) <= 1/4`,
/// `h(s) = (f(t1) - f(s)) (g(t1) - g(s))` runs from 0 at `t1` to at least
/// `4 Cov` in magnitude at `t2`; bisection finds `s` with `h(s) = 4 Cov`.
pub fn covariance_witness(
    f: &Expression,
    g: &Expression,
    m: &MeasureSpec,
    config: &SynthConfig,
) -> Result<CovarianceWitness> {
    let mom = moments(f, g, m)?;
    let cov = mom.covariance;
    let centered = f
        .sub(&Expression::constant(mom.mean_f))
        .mul(&g.sub(&Expression::constant(mom.mean_g)));
    let curve = CurveSystem::new(vec![centered, f.clone()], *m.interval())?;
    let rule = synthesize_rule(&curve, m, config)?;

    let gap = |a: f64, b: f64| -> Result<f64> { Ok((f.eval(a)? - f.eval(b)?) * (g.eval(a)? - g.eval(b)?)) };
    let t1 = rule.nodes[0];
    let witness = |t2: f64| -> Result<CovarianceWitness> {
        Ok(CovarianceWitness {
            t1,
            t2,
            covariance: cov,
            product_gap: 0.25 * gap(t1, t2)?,
        })
    };
    if rule.nodes.len() == 1 || cov == 0.0 {
        return witness(t1);
    }
    let t2 = rule.nodes[1];
    let lambda = rule.weights[0] / rule.total;
    if lambda * (1.0 - lambda) == 0.25 {
        return witness(t2);
    }

    let target = 4.0 * cov;
    let phi = |s: f64| -> Result<f64> { Ok(gap(t1, s)? - target) };
    let (mut lo, mut hi) = (t1, t2);
    let (phi_lo, phi_hi) = (phi(lo)?, phi(hi)?);
    if phi_hi == 0.0 {
        return witness(hi);
    }
    if phi_lo.signum() == phi_hi.signum() {
        return Err(Error::Bisection(format!(
            "h(s) - 4 Cov keeps sign {} on [{t1}, {t2}]",
            phi_lo.signum()
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        let value = phi(mid)?;
        if value == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if value.signum() == phi_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = if phi(lo)?.abs() <= phi(hi)?.abs() { lo } else { hi };
    let w = witness(s)?;
    if (w.product_gap - cov).abs() > config.gate * (1.0 + cov.abs()) {
        return Err(Error::Bisection(format!(
            "bisection ended at {s} with quarter product {} for covariance {cov}",
            w.product_gap
        )));
    }
    Ok(w)
}

/// Infimum and supremum of `f` over `[a, b]`: a uniform scan followed by
/// golden-section refinement around the best samples.
fn extrema(f: &Expression, a: f64, b: f64) -> Result<(f64, f64)> {
    const SCAN: usize = 4096;
    let h = (b - a) / SCAN as f64;
    let ts: Vec<f64> = (0..=SCAN).map(|i| if i == SCAN { b } else { a + h * i as f64 }).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| f.eval(t)).collect::<std::result::Result<_, _>>()?;
    let (mut imin, mut imax) = (0, 0);
    for i in 1..vals.len() {
        if vals[i] < vals[imin] {
            imin = i;
        }
        if vals[i] > vals[imax] {
            imax = i;
        }
    }
    let bracket = |i: usize| (ts[i.saturating_sub(1)], ts[(i + 1).min(SCAN)]);
    let (lo, hi) = bracket(imin);
    let min = golden(|t| f.eval(t), lo, hi)?.min(vals[imin]);
    let (lo, hi) = bracket(imax);
    let max = -golden(|t| f.eval(t).map(|v| -v), lo, hi)?.min(-vals[imax]);
    Ok((min, max))
}

/// Smallest value found by golden-section search on `[a, b]`.
fn golden<F>(mut f: F, mut a: f64, mut b: f64) -> Result<f64>
where
    F: FnMut(f64) -> std::result::Result<f64, crate::expr::EvalError>,
{
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    let mut best = fc.min(fd);
    while b - a > 1e-10 * (1.0 + a.abs().max(b.abs())) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
        best = best.min(fc).min(fd);
    }
    Ok(best)
}

/// Extrema over the interval. A non-compact interval is scanned on its
/// exhaustion windows until two consecutive windows leave all four values
/// unchanged to `1e-10` relative.
fn interval_extrema(f: &Expression, g: &Expression, interval: &IntervalSpec) -> Result<[f64; 4]> {
    let level = |w: IntervalSpec| -> Result<[f64; 4]> {
        let (a, b) = extrema(f, w.lower, w.upper)?;
        let (c, d) = extrema(g, w.lower, w.upper)?;
        Ok([a, b, c, d])
    };
    if interval.is_compact() {
        return level(*interval);
    }
    let mut prev = level(interval.exhaustion_step(0))?;
    let mut quiet = 0;
    let mut moving = [false; 4];
    for p in 1..=MAX_EXHAUSTION_STEPS {
        let next = level(interval.exhaustion_step(p))?;
        for k in 0..4 {
            moving[k] = (prev[k] - next[k]).abs() > 1e-10 * (1.0 + next[k].abs());
        }
        quiet = if moving.contains(&true) { 0 } else { quiet + 1 };
        prev = next;
        if quiet >= 2 {
            return Ok(prev);
        }
    }
    let which = if moving[0] || moving[1] { "f" } else { "g" };
    Err(Error::Unbounded {
        function: which.to_string(),
    })
}

/// Covariance against the Grüss bound `(M_f - m_f)(M_g - m_g) / 4`, with
/// the extrema taken over the whole interval.
pub fn gruss_check(f: &Expression, g: &Expression, m: &MeasureSpec) -> Result<GrussReport> {
    let cov = covariance(f, g, m)?;
    let [min_f, max_f, min_g, max_g] = interval_extrema(f, g, m.interval())?;
    let bound = 0.25 * (max_f - min_f) * (max_g - min_g);
    Ok(GrussReport {
        covariance: cov,
        min_f,
        max_f,
        min_g,
        max_g,
        bound,
        slack: bound - cov.abs(),
    })
}

/// Both sides of the discrete Grüss inequality, summed in index order.
pub fn gruss_discrete(p: &[f64], u: &[f64], v: &[f64]) -> Result<DiscreteGrussReport> {
    if p.is_empty() || p.len() != u.len() || p.len() != v.len() {
        return Err(Error::InvalidInput(format!(
            "p, u and v must be non-empty and of equal length, got {}, {}, {}",
            p.len(),
            u.len(),
            v.len()
        )));
    }
    if p.len() > MAX_SEQUENCE_LEN {
        return Err(Error::InvalidInput(format!(
            "sequences longer than {MAX_SEQUENCE_LEN} are not accepted"
        )));
    }
    if let Some(x) = u.iter().chain(v).find(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite sequence value {x}")));
    }
    if p.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::WeightNormalization { sum });
    }
    let (mut euv, mut eu, mut ev) = (0.0, 0.0, 0.0);
    for i in 0..p.len() {
        euv += p[i] * u[i] * v[i];
        eu += p[i] * u[i];
        ev += p[i] * v[i];
    }
    let covariance = euv - eu * ev;
    let min_u = u.iter().copied().fold(f64::INFINITY, f64::min);
    let max_u = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_v = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max_v = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bound = 0.25 * (max_u - min_u) * (max_v - min_v);
    let lhs = covariance.abs();
    Ok(DiscreteGrussReport {
        lhs,
        bound,
        slack: bound - lhs,
        covariance,
        min_u,
        max_u,
        min_v,
        max_v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Atom;

    fn e(s: &str) -> Expression {
        Expression::parse(s).unwrap()
    }

    fn uniform() -> MeasureSpec {
        MeasureSpec::lebesgue(IntervalSpec::closed(0.0, 1.0).unwrap())
    }

    #[test]
    fn covariance_closed_forms() {
        assert!((covariance(&e("t"), &e("t"), &uniform()).unwrap() - 1.0 / 12.0).abs() < 1e-10);
        assert!((covariance(&e("t"), &e("t^2"), &uniform()).unwrap() - 1.0 / 12.0).abs() < 1e-10);
        assert!(covariance(&e("3"), &e("sin(t)"), &uniform()).unwrap().abs() < 1e-15);
    }

    #[test]
    fn witness_for_identity() {
        let w = covariance_witness(&e("t"), &e("t"), &uniform(), &SynthConfig::default()).unwrap();
        assert!(((w.t1 - w.t2).abs() - 3f64.sqrt().recip()).abs() < 1e-6);
        assert!((w.product_gap - w.covariance).abs() < 1e-8);
    }

    #[test]
    fn witness_for_t_and_square() {
        let w = covariance_witness(&e("t"), &e("t^2"), &uniform(), &SynthConfig::default()).unwrap();
        let (a, b) = (w.t1, w.t2);
        assert!(((a - b) * (a * a - b * b) - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn constant_gives_coincident_points() {
        let w = covariance_witness(&e("2"), &e("t"), &uniform(), &SynthConfig::default()).unwrap();
        assert_eq!(w.t1, w.t2);
        assert_eq!(w.product_gap, 0.0);
    }

    #[test]
    fn single_atom_has_no_covariance() {
        let i = IntervalSpec::closed(0.0, 1.0).unwrap();
        let m = MeasureSpec::atomic(i, vec![Atom { t: 0.4, mass: 3.0 }]).unwrap();
        assert_eq!(covariance(&e("t"), &e("exp(t)"), &m).unwrap(), 0.0);
        let w = covariance_witness(&e("t"), &e("exp(t)"), &m, &SynthConfig::default()).unwrap();
        assert_eq!(w.t1, w.t2);
    }

    #[test]
    fn gruss_examples() {
        let r = gruss_check(&e("t"), &e("t"), &uniform()).unwrap();
        assert!((r.bound - 0.25).abs() < 1e-12);
        assert!((r.slack - 1.0 / 6.0).abs() < 1e-10);

        let r = gruss_check(&e("t"), &e("-t"), &uniform()).unwrap();
        assert!((r.covariance + 1.0 / 12.0).abs() < 1e-10);
        assert!(r.slack > 0.0);

        let r = gruss_check(&e("5"), &e("t"), &uniform()).unwrap();
        assert_eq!(r.slack, r.bound);
    }

    #[test]
    fn gruss_interior_extremum() {
        let r = gruss_check(&e("sin(3*t)"), &e("t"), &uniform()).unwrap();
        assert!((r.max_f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gruss_on_half_line() {
        let i = IntervalSpec::new(0.0, f64::INFINITY, false, true).unwrap();
        let m = MeasureSpec::with_density(i, e("exp(-t)")).unwrap();
        let r = gruss_check(&e("exp(-t)"), &e("t/(1+t)"), &m).unwrap();
        assert!(r.min_f.abs() < 1e-9 && (r.max_f - 1.0).abs() < 1e-12);
        assert!((r.max_g - 1.0).abs() < 1e-9);
        assert!(r.slack > 0.0);

        assert!(matches!(
            gruss_check(&e("t"), &e("1"), &m),
            Err(Error::Unbounded { .. })
        ));
    }

    #[test]
    fn discrete_examples() {
        let r = gruss_discrete(&[0.5, 0.5], &[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert_eq!((r.lhs, r.bound, r.slack), (0.25, 0.25, 0.0));

        let r = gruss_discrete(&[0.5, 0.5], &[2.0, 2.0], &[0.0, 1.0]).unwrap();
        assert_eq!(r.lhs, 0.0);

        // sum p u v = 1/3 and sum p u = sum p v = 1.
        let third = 1.0 / 3.0;
        let r = gruss_discrete(&[third; 3], &[0.0, 1.0, 2.0], &[2.0, 1.0, 0.0]).unwrap();
        assert!((r.lhs - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.bound, 1.0);

        assert!(matches!(
            gruss_discrete(&[0.5, 0.6], &[0.0, 1.0], &[0.0, 1.0]),
            Err(Error::WeightNormalization { .. })
        ));
    }
}
