//! Finite positive measures on an interval: an optional density plus atoms.
//!
//! Integrals over compact intervals use adaptive Gauss-Kronrod panels. Open
//! or infinite intervals are handled by exhaustion: the integral is the sum of
//! contributions over the nested compact intervals of
//! [`IntervalSpec::exhaustion_step`], stopped once further shells no longer
//! change the result.

pub(crate) mod adaptive;
mod interval;

pub use interval::{IntervalSpec, MAX_EXHAUSTION_STEPS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{chebyshev_points, Expression, PROBE_POINTS};
use crate::hull::CurveSystem;
use crate::RealVector;

/// Default relative integration tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Density values in `(-NEGATIVITY_TOL, 0)` are treated as roundoff and
/// clipped to zero; anything lower is an error.
pub const NEGATIVITY_TOL: f64 = 1e-12;

/// A point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub t: f64,
    pub mass: f64,
}

/// A finite positive measure `w(t) dt + sum_i m_i delta_{t_i}` on an interval.
///
/// Atoms are kept sorted by location so atomic sums are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct MeasureSpec {
    interval: IntervalSpec,
    density: Option<Expression>,
    atoms: Vec<Atom>,
}

/// Integrals `J_k = int x_k dmu` with their estimated absolute errors.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralVector {
    pub values: RealVector,
    pub estimated_abs_error: RealVector,
}

/// Mass and first moments of a list of functions.
#[derive(Debug, Clone)]
pub(crate) struct Moments {
    pub mass: f64,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Contribution of one exhaustion step: the integrals over
/// `window \ previous window`. Index 0 of `increment` is the mass.
#[derive(Debug, Clone)]
struct Shell {
    window: IntervalSpec,
    increment: Vec<f64>,
    error: Vec<f64>,
}

impl MeasureSpec {
    pub fn new(interval: IntervalSpec, density: Option<Expression>, mut atoms: Vec<Atom>) -> Result<Self> {
        for atom in &atoms {
            if !interval.contains(atom.t) {
                return Err(Error::InvalidInput(format!(
                    "atom at {} lies outside {interval}",
                    atom.t
                )));
            }
            if !(atom.mass > 0.0 && atom.mass.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "atom at {} has non-positive or non-finite mass {}",
                    atom.t, atom.mass
                )));
            }
        }
        if density.is_none() && atoms.is_empty() {
            return Err(Error::InvalidInput("measure has neither density nor atoms".into()));
        }
        atoms.sort_by(|a, b| a.t.total_cmp(&b.t));
        let measure = Self {
            interval,
            density,
            atoms,
        };
        if measure.density.is_some() {
            let window = interval.probe_window();
            for t in chebyshev_points(window.lower, window.upper, PROBE_POINTS) {
                measure.density_at(t)?;
            }
        }
        Ok(measure)
    }

    /// Lebesgue measure on the interval.
    pub fn lebesgue(interval: IntervalSpec) -> Self {
        Self {
            interval,
            density: Some(Expression::constant(1.0)),
            atoms: Vec::new(),
        }
    }

    pub fn with_density(interval: IntervalSpec, density: Expression) -> Result<Self> {
        Self::new(interval, Some(density), Vec::new())
    }

    pub fn atomic(interval: IntervalSpec, atoms: Vec<Atom>) -> Result<Self> {
        Self::new(interval, None, atoms)
    }

    pub fn interval(&self) -> &IntervalSpec {
        &self.interval
    }

    pub fn density(&self) -> Option<&Expression> {
        self.density.as_ref()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// The measure multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidInput(format!("scale factor {factor} must be positive")));
        }
        let density = self
            .density
            .as_ref()
            .map(|w| Expression::constant(factor).mul(w));
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                t: a.t,
                mass: a.mass * factor,
            })
            .collect();
        Self::new(self.interval, density, atoms)
    }

    /// Density value at `t`, with roundoff-level negatives clipped to zero.
    pub fn density_at(&self, t: f64) -> Result<f64> {
        let Some(w) = &self.density else {
            return Ok(0.0);
        };
        let value = w.eval(t)?;
        if value < -NEGATIVITY_TOL {
            return Err(Error::NegativeDensity { t, value });
        }
        Ok(value.max(0.0))
    }

    /// Total mass `mu(I)` at the default tolerance.
    pub fn total_mass(&self) -> Result<f64> {
        self.total_mass_with_tol(DEFAULT_TOL)
    }

    pub fn total_mass_with_tol(&self, tol: f64) -> Result<f64> {
        let moments = self.moments(&[], tol).map_err(|e| match e {
            Error::NonConvergence { .. } | Error::Exhaustion(_) => Error::DivergentMass(e.to_string()),
            other => other,
        })?;
        if !(moments.mass > 0.0 && moments.mass.is_finite()) {
            return Err(Error::DivergentMass(format!("mu(I) = {}", moments.mass)));
        }
        Ok(moments.mass)
    }

    /// `int_I f dmu` to relative tolerance `tol`.
    pub fn integrate(&self, f: &Expression, tol: f64) -> Result<f64> {
        let moments = self.moments(std::slice::from_ref(f), tol)?;
        Ok(moments.values[0])
    }

    /// All component integrals of `curve`, computed on shared panels.
    pub fn integrate_system(&self, curve: &CurveSystem, tol: f64) -> Result<IntegralVector> {
        let moments = self.moments(curve.components(), tol)?;
        Ok(IntegralVector {
            values: RealVector::from_vec(moments.values),
            estimated_abs_error: RealVector::from_vec(moments.errors),
        })
    }

    /// Integrals over the whole interval together with a compact
    /// sub-interval `I_p` that carries all but a `tol` fraction of the mass
    /// and whose renormalized integrals match the full ones to `tol`.
    ///
    /// A compact interval is returned unchanged.
    pub fn exhaust_interval(&self, curve: &CurveSystem, tol: f64) -> Result<(IntegralVector, IntervalSpec)> {
        if self.interval.is_compact() {
            return Ok((self.integrate_system(curve, tol)?, self.interval));
        }
        let fns = curve.components();
        let dim = fns.len() + 1;
        let shells = self.shells(fns, tol)?;
        let atom_part = self.atom_sums(fns, |_| true)?;

        let mut total = vec![0.0; dim];
        let mut total_err = vec![0.0; dim];
        for shell in &shells {
            for k in 0..dim {
                total[k] += shell.increment[k];
                total_err[k] += shell.error[k];
            }
        }
        for k in 0..dim {
            total[k] += atom_part[k];
        }
        let mass = total[0];
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::DivergentMass(format!("mu(I) = {mass}")));
        }

        let mut inner = vec![0.0; dim];
        for (p, shell) in shells.iter().enumerate() {
            for k in 0..dim {
                inner[k] += shell.increment[k];
            }
            let window = shell.window;
            let atoms_in = self.atom_sums(fns, |t| t >= window.lower && t <= window.upper)?;
            let tail_mass = shells[p + 1..].iter().map(|s| s.increment[0]).sum::<f64>()
                + self
                    .atoms
                    .iter()
                    .filter(|a| a.t < window.lower || a.t > window.upper)
                    .map(|a| a.mass)
                    .sum::<f64>();
            let inner_mass = inner[0] + atoms_in[0];
            if tail_mass > tol * mass || !(inner_mass > 0.0) {
                continue;
            }
            let close = (1..dim).all(|k| {
                let full = total[k] / mass;
                let part = (inner[k] + atoms_in[k]) / inner_mass;
                (part - full).abs() <= tol * (1.0 + full.abs())
            });
            if close {
                let vector = IntegralVector {
                    values: RealVector::from_iterator(dim - 1, total[1..].iter().copied()),
                    estimated_abs_error: RealVector::from_iterator(dim - 1, total_err[1..].iter().copied()),
                };
                return Ok((vector, window));
            }
        }
        Err(Error::Exhaustion(
            "tail integrals do not shrink below tolerance within the expansion schedule".into(),
        ))
    }

    /// Mass and moments over the full interval.
    pub(crate) fn moments(&self, fns: &[Expression], tol: f64) -> Result<Moments> {
        let dim = fns.len() + 1;
        let mut total = vec![0.0; dim];
        let mut errors = vec![0.0; dim];
        if self.density.is_some() {
            if self.interval.is_compact() {
                let est = self.density_integrals(fns, self.interval.lower, self.interval.upper, tol, &vec![1.0; dim])?;
                total = est.values;
                errors = est.errors;
            } else {
                for shell in self.shells(fns, tol)? {
                    for k in 0..dim {
                        total[k] += shell.increment[k];
                        errors[k] += shell.error[k];
                    }
                }
            }
        }
        let atoms = self.atom_sums(fns, |_| true)?;
        for k in 0..dim {
            total[k] += atoms[k];
        }
        Ok(Moments {
            mass: total[0],
            values: total[1..].to_vec(),
            errors: errors[1..].to_vec(),
        })
    }

    /// Mass and moments of the density part restricted to `[a, b]`.
    pub(crate) fn density_integrals(
        &self,
        fns: &[Expression],
        a: f64,
        b: f64,
        tol: f64,
        scale: &[f64],
    ) -> Result<adaptive::Estimate> {
        let dim = fns.len() + 1;
        let mut integrand = (dim, |t: f64, out: &mut [f64]| -> Result<()> {
            let w = self.density_at(t)?;
            out[0] = w;
            for (slot, f) in out[1..].iter_mut().zip(fns) {
                *slot = if w == 0.0 { 0.0 } else { w * f.eval(t)? };
            }
            Ok(())
        });
        adaptive::integrate(&mut integrand, a, b, tol, scale)
    }

    /// Atom contributions `(sum m_i, sum m_i f_k(t_i), ...)` over atoms
    /// accepted by `keep`, summed in location order.
    fn atom_sums(&self, fns: &[Expression], keep: impl Fn(f64) -> bool) -> Result<Vec<f64>> {
        let mut sums = vec![0.0; fns.len() + 1];
        for atom in self.atoms.iter().filter(|a| keep(a.t)) {
            sums[0] += atom.mass;
            for (slot, f) in sums[1..].iter_mut().zip(fns) {
                *slot += atom.mass * f.eval(atom.t)?;
            }
        }
        Ok(sums)
    }

    /// Density integrals over the exhaustion shells of a non-compact
    /// interval. Stops after two consecutive shells change no component by
    /// more than a tenth of the tolerance.
    fn shells(&self, fns: &[Expression], tol: f64) -> Result<Vec<Shell>> {
        let dim = fns.len() + 1;
        let mut shells: Vec<Shell> = Vec::new();
        if self.density.is_none() {
            // Only atoms: grow the window until it holds all of them.
            for p in 0..=MAX_EXHAUSTION_STEPS {
                let window = self.interval.exhaustion_step(p);
                shells.push(Shell {
                    window,
                    increment: vec![0.0; dim],
                    error: vec![0.0; dim],
                });
                if self.atoms.iter().all(|a| a.t >= window.lower && a.t <= window.upper) {
                    break;
                }
            }
            return Ok(shells);
        }
        let mut acc: Vec<f64> = vec![0.0; dim];
        let mut quiet = 0;
        for p in 0..=MAX_EXHAUSTION_STEPS {
            let window = self.interval.exhaustion_step(p);
            let scale: Vec<f64> = acc.iter().map(|a| 1.0 + a.abs()).collect();
            let (increment, error) = if p == 0 {
                let est = self.density_integrals(fns, window.lower, window.upper, tol, &scale)?;
                (est.values, est.errors)
            } else {
                let prev = shells[p - 1].window;
                let progressed = (window.lower < prev.lower && self.interval.contains(window.lower))
                    || (window.upper > prev.upper && self.interval.contains(window.upper));
                if !progressed {
                    // Floating-point resolution reached at an open end.
                    return Ok(shells);
                }
                let mut inc = vec![0.0; dim];
                let mut err = vec![0.0; dim];
                let mut pieces = Vec::with_capacity(2);
                if window.lower < prev.lower {
                    pieces.push((window.lower, prev.lower));
                }
                if window.upper > prev.upper {
                    pieces.push((prev.upper, window.upper));
                }
                for (lo, hi) in pieces {
                    let est = self.density_integrals(fns, lo, hi, tol, &scale)?;
                    for k in 0..dim {
                        inc[k] += est.values[k];
                        err[k] += est.errors[k];
                    }
                }
                (inc, err)
            };
            let small = p > 0
                && (0..dim).all(|k| increment[k].abs() <= 0.1 * tol * (1.0 + (acc[k] + increment[k]).abs()));
            for k in 0..dim {
                acc[k] += increment[k];
            }
            shells.push(Shell {
                window,
                increment,
                error,
            });
            quiet = if small { quiet + 1 } else { 0 };
            if quiet >= 2 {
                return Ok(shells);
            }
        }
        Err(Error::Exhaustion(format!(
            "integrals over {} did not settle within {MAX_EXHAUSTION_STEPS} steps",
            self.interval
        )))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    interval: IntervalSpec,
    #[serde(default)]
    density: Option<Expression>,
    #[serde(default)]
    atoms: Vec<Atom>,
}

impl TryFrom<RawMeasure> for MeasureSpec {
    type Error = String;

    fn try_from(raw: RawMeasure) -> std::result::Result<Self, String> {
        MeasureSpec::new(raw.interval, raw.density, raw.atoms).map_err(|e| e.to_string())
    }
}

impl From<MeasureSpec> for RawMeasure {
    fn from(m: MeasureSpec) -> Self {
        RawMeasure {
            interval: m.interval,
            density: m.density,
            atoms: m.atoms,
        }
    }
}
