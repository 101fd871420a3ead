use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of exhaustion steps for open or infinite ends.
pub const MAX_EXHAUSTION_STEPS: usize = 60;

/// A real interval with possibly open or infinite ends.
///
/// An infinite endpoint is always open; the constructor enforces this.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval", into = "RawInterval")]
pub struct IntervalSpec {
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
    pub upper_open: bool,
}

impl IntervalSpec {
    pub fn new(lower: f64, upper: f64, lower_open: bool, upper_open: bool) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() {
            return Err(Error::InvalidInput("interval endpoint is NaN".into()));
        }
        if lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::InvalidInput(format!(
                "interval endpoints out of order: [{lower}, {upper}]"
            )));
        }
        if !(lower < upper) {
            return Err(Error::InvalidInput(format!(
                "interval requires lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self {
            lower,
            upper,
            lower_open: lower_open || lower.is_infinite(),
            upper_open: upper_open || upper.is_infinite(),
        })
    }

    /// The closed interval `[lower, upper]`.
    pub fn closed(lower: f64, upper: f64) -> Result<Self> {
        Self::new(lower, upper, false, false)
    }

    pub fn is_compact(&self) -> bool {
        !self.lower_open && !self.upper_open
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, t: f64) -> bool {
        let above = if self.lower_open { t > self.lower } else { t >= self.lower };
        let below = if self.upper_open { t < self.upper } else { t <= self.upper };
        above && below
    }

    /// Clamps `t` into the interval. Open finite ends are replaced by the
    /// nearest point a relative distance of `1e-12` inside.
    pub fn project(&self, t: f64) -> f64 {
        let inset = 1e-12 * if self.is_bounded() { self.width() } else { 1.0 };
        let lo = if self.lower_open { self.lower + inset } else { self.lower };
        let hi = if self.upper_open { self.upper - inset } else { self.upper };
        if t.is_nan() {
            return if lo.is_finite() { lo } else if hi.is_finite() { hi } else { 0.0 };
        }
        t.max(lo).min(hi)
    }

    /// The `p`-th compact interval of the exhaustion sequence.
    ///
    /// Infinite ends move outward by doubling, open finite ends approach the
    /// endpoint by halving the gap, closed ends stay fixed. The sequence is
    /// nested and its union is the whole interval. For a compact interval
    /// every step returns the interval itself.
    pub fn exhaustion_step(&self, p: usize) -> IntervalSpec {
        let grow = 2f64.powi(p as i32);
        let shrink = 0.5f64.powi(p as i32);
        let gap = if self.is_bounded() { 0.25 * self.width() } else { 0.25 };
        let lower = if !self.lower_open {
            self.lower
        } else if self.lower.is_finite() {
            (self.lower + gap * shrink).max(self.lower.next_up())
        } else if self.upper.is_finite() {
            self.upper - grow
        } else {
            -grow
        };
        let upper = if !self.upper_open {
            self.upper
        } else if self.upper.is_finite() {
            (self.upper - gap * shrink).min(self.upper.next_down())
        } else if self.lower.is_finite() {
            self.lower + grow
        } else {
            grow
        };
        IntervalSpec {
            lower,
            upper,
            lower_open: false,
            upper_open: false,
        }
    }

    /// A compact window used for probing: the interval itself when compact,
    /// otherwise the first exhaustion step.
    pub fn probe_window(&self) -> IntervalSpec {
        self.exhaustion_step(0)
    }
}

impl fmt::Display for IntervalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.lower_open { '(' } else { '[' };
        let close = if self.upper_open { ')' } else { ']' };
        write!(f, "{open}{}, {}{close}", self.lower, self.upper)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Bound {
    Finite(f64),
    Named(String),
}

impl Bound {
    fn value(&self) -> std::result::Result<f64, String> {
        match self {
            Bound::Finite(x) => Ok(*x),
            Bound::Named(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(format!("unrecognized bound `{other}`")),
            },
        }
    }

    fn from_value(x: f64) -> Self {
        if x == f64::INFINITY {
            Bound::Named("inf".into())
        } else if x == f64::NEG_INFINITY {
            Bound::Named("-inf".into())
        } else {
            Bound::Finite(x)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInterval {
    lower: Bound,
    upper: Bound,
    #[serde(default)]
    lower_open: bool,
    #[serde(default)]
    upper_open: bool,
}

impl TryFrom<RawInterval> for IntervalSpec {
    type Error = String;

    fn try_from(raw: RawInterval) -> std::result::Result<Self, String> {
        let lower = raw.lower.value()?;
        let upper = raw.upper.value()?;
        IntervalSpec::new(lower, upper, raw.lower_open, raw.upper_open).map_err(|e| e.to_string())
    }
}

impl From<IntervalSpec> for RawInterval {
    fn from(i: IntervalSpec) -> Self {
        RawInterval {
            lower: Bound::from_value(i.lower),
            upper: Bound::from_value(i.upper),
            lower_open: i.lower_open,
            upper_open: i.upper_open,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(IntervalSpec::closed(1.0, 0.0).is_err());
        assert!(IntervalSpec::closed(0.0, 0.0).is_err());
        let half_line = IntervalSpec::new(0.0, f64::INFINITY, false, false).unwrap();
        assert!(half_line.upper_open);
        assert!(!half_line.is_compact());
    }

    #[test]
    fn exhaustion_is_nested() {
        let cases = [
            IntervalSpec::new(0.0, f64::INFINITY, false, true).unwrap(),
            IntervalSpec::new(0.0, 1.0, true, true).unwrap(),
            IntervalSpec::new(f64::NEG_INFINITY, f64::INFINITY, true, true).unwrap(),
            IntervalSpec::new(f64::NEG_INFINITY, 2.0, true, false).unwrap(),
            IntervalSpec::new(-1.0, f64::INFINITY, true, true).unwrap(),
        ];
        for interval in cases {
            let mut prev = interval.exhaustion_step(0);
            assert!(prev.lower < prev.upper);
            for p in 1..=MAX_EXHAUSTION_STEPS {
                let next = interval.exhaustion_step(p);
                assert!(next.lower <= prev.lower && next.upper >= prev.upper, "{interval} step {p}");
                assert!(interval.contains(next.lower) && interval.contains(next.upper));
                prev = next;
            }
        }
    }

    #[test]
    fn compact_exhaustion_is_identity() {
        let i = IntervalSpec::closed(-2.0, 3.0).unwrap();
        assert_eq!(i.exhaustion_step(7), i);
    }

    #[test]
    fn json_bounds() {
        let i: IntervalSpec =
            serde_json::from_str(r#"{"lower": 0, "upper": "inf", "lower_open": false, "upper_open": true}"#)
                .unwrap();
        assert_eq!(i.upper, f64::INFINITY);
        let text = serde_json::to_string(&i).unwrap();
        assert_eq!(text, r#"{"lower":0.0,"upper":"inf","lower_open":false,"upper_open":true}"#);
        assert!(serde_json::from_str::<IntervalSpec>(r#"{"lower": 0, "upper": 1, "bogus": 1}"#).is_err());
        assert!(serde_json::from_str::<IntervalSpec>(r#"{"lower": 0, "upper": "huge"}"#).is_err());
    }

    #[test]
    fn projection() {
        let i = IntervalSpec::new(0.0, 1.0, true, false).unwrap();
        assert!(i.project(-1.0) > 0.0);
        assert_eq!(i.project(2.0), 1.0);
        assert_eq!(i.project(0.5), 0.5);
    }
}
