//! Exact quadrature rules with non-negative weights for arbitrary systems of
//! continuous functions and finite positive measures on an interval.
//!
//! For `n` continuous, integrable functions `x_1, ..., x_n` on an interval
//! `I` and a finite positive measure `mu`, there are at most `n` nodes
//! `t_i in I` and weights `lambda_i >= 0` summing to `mu(I)` with
//!
//! ```text
//! int_I x_k dmu = sum_i lambda_i x_k(t_i),    k = 1..n.
//! ```
//!
//! [`synth::synthesize_rule`] constructs such a rule: it discretizes the
//! integral vector as a finite convex combination of curve points, thins it
//! with [`hull::caratheodory_finite`], drops one more point by sliding along
//! the curve ([`hull::reduce_on_curve`]) and polishes the result with a
//! damped Gauss-Newton solve. The [`stats`] module builds on this to
//! represent a covariance as `(f(t1) - f(t2))(g(t1) - g(t2)) / 4` and to
//! check the Grüss bound.

pub mod chebyshev;
pub mod error;
pub mod expr;
pub mod hull;
pub(crate) mod linalg;
pub mod measure;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use expr::Expression;
pub use hull::{ConvexCombination, Curve, CurveSystem};
pub use measure::{Atom, IntegralVector, IntervalSpec, MeasureSpec};

/// A point of `R^n`.
pub type RealVector = nalgebra::DVector<f64>;
