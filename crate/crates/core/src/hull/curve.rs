use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::measure::IntervalSpec;
use crate::RealVector;

/// A parametrized curve `t -> x(t)` in `R^n`.
pub trait Curve {
    fn dim(&self) -> usize;

    fn point(&self, t: f64) -> Result<RealVector>;
}

/// The curve `t -> (x_1(t), ..., x_n(t))` given by `n` expressions on an
/// interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSystem {
    components: Vec<Expression>,
    interval: IntervalSpec,
}

impl CurveSystem {
    /// Builds the system and runs the continuity probe on the interval's
    /// probe window.
    pub fn new(components: Vec<Expression>, interval: IntervalSpec) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("a curve needs at least one component".into()));
        }
        let system = Self {
            components,
            interval,
        };
        system.probe(&interval.probe_window())?;
        Ok(system)
    }

    /// Parses every component from text.
    pub fn parse<S: AsRef<str>>(components: &[S], interval: IntervalSpec) -> Result<Self> {
        let parsed = components
            .iter()
            .map(|s| Expression::parse(s.as_ref()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(parsed, interval)
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    pub fn interval(&self) -> &IntervalSpec {
        &self.interval
    }

    /// Evaluates every component at the Chebyshev probe points of `window`.
    pub fn probe(&self, window: &IntervalSpec) -> Result<()> {
        for c in &self.components {
            c.probe(window.lower, window.upper)?;
        }
        Ok(())
    }

    /// The subsystem made of the components at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> CurveSystem {
        CurveSystem {
            components: indices.iter().map(|&i| self.components[i].clone()).collect(),
            interval: self.interval,
        }
    }

    pub fn with_interval(&self, interval: IntervalSpec) -> CurveSystem {
        CurveSystem {
            components: self.components.clone(),
            interval,
        }
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        for (slot, c) in out.iter_mut().zip(&self.components) {
            *slot = c.eval(t)?;
        }
        Ok(())
    }
}

impl Curve for CurveSystem {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn point(&self, t: f64) -> Result<RealVector> {
        let mut out = RealVector::zeros(self.components.len());
        self.eval_into(t, out.as_mut_slice())?;
        Ok(out)
    }
}

/// Adapts a closure into a [`Curve`].
pub struct FnCurve<F> {
    dim: usize,
    f: F,
}

impl<F> FnCurve<F>
where
    F: Fn(f64) -> RealVector,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Curve for FnCurve<F>
where
    F: Fn(f64) -> RealVector,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn point(&self, t: f64) -> Result<RealVector> {
        Ok((self.f)(t))
    }
}
