//! Textual expressions in one real variable `t`.
//!
//! Expressions define the component functions of a curve, measure densities,
//! and the pair `f`, `g` used by the covariance tools. The grammar is closed:
//! literals, `t`, the constants `pi` and `e`, the operators `+ - * / ^` with
//! unary minus, and the functions `sin cos tan exp log sqrt abs min max`.
//! There is no implicit multiplication, so `2t` is rejected.
//!
//! Precedence, tightest first: `^` (right-associative), unary `-`, `* /`,
//! `+ -`. Consequently `-2^2` is `-4` and `2^3^2` is `512`.

mod lexer;
mod parser;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of Chebyshev-spaced points used by [`Expression::probe`].
pub const PROBE_POINTS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownIdentifier(String),
}

/// A parse failure carrying the 0-based byte offset into the source text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error at byte {}: {msg}", self.offset),
            ParseErrorKind::UnknownIdentifier(name) => {
                write!(f, "unknown identifier `{name}` at byte {}", self.offset)
            }
        }
    }
}

/// Evaluation left the real domain. `subexpr` is the pretty-printed
/// subexpression that failed.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error in `{subexpr}` at t = {t:?}: {reason}")]
pub struct EvalError {
    pub subexpr: String,
    pub t: f64,
    pub reason: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
            BinaryOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Function {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Function::Sin,
            "cos" => Function::Cos,
            "tan" => Function::Tan,
            "exp" => Function::Exp,
            "log" => Function::Log,
            "sqrt" => Function::Sqrt,
            "abs" => Function::Abs,
            "min" => Function::Min,
            "max" => Function::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Tan => "tan",
            Function::Exp => "exp",
            Function::Log => "log",
            Function::Sqrt => "sqrt",
            Function::Abs => "abs",
            Function::Min => "min",
            Function::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Function::Min | Function::Max => 2,
            _ => 1,
        }
    }
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Number(f64),
    Var,
    Constant(Constant),
    Neg(Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    Call(Function, Box<Node>),
    Call2(Function, Box<Node>, Box<Node>),
}

const PREC_NEG: u8 = 3;
const PREC_ATOM: u8 = 5;

impl Node {
    fn precedence(&self) -> u8 {
        match self {
            Node::Number(x) if x.is_sign_negative() => PREC_NEG,
            Node::Neg(_) => PREC_NEG,
            Node::Binary(op, _, _) => op.precedence(),
            _ => PREC_ATOM,
        }
    }

    fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let value = match self {
            Node::Number(x) => *x,
            Node::Var => t,
            Node::Constant(Constant::Pi) => std::f64::consts::PI,
            Node::Constant(Constant::E) => std::f64::consts::E,
            Node::Neg(inner) => -inner.eval(t)?,
            Node::Binary(op, lhs, rhs) => {
                let a = lhs.eval(t)?;
                let b = rhs.eval(t)?;
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => {
                        if b == 0.0 {
                            return Err(self.domain(t, "division by zero"));
                        }
                        a / b
                    }
                    BinaryOp::Pow => {
                        if a < 0.0 && b.fract() != 0.0 {
                            return Err(self.domain(t, "negative base with non-integer exponent"));
                        }
                        if a == 0.0 && b < 0.0 {
                            return Err(self.domain(t, "division by zero"));
                        }
                        a.powf(b)
                    }
                }
            }
            Node::Call(func, arg) => {
                let x = arg.eval(t)?;
                match func {
                    Function::Sin => x.sin(),
                    Function::Cos => x.cos(),
                    Function::Tan => x.tan(),
                    Function::Exp => x.exp(),
                    Function::Log => {
                        if x <= 0.0 {
                            return Err(self.domain(t, "logarithm of non-positive value"));
                        }
                        x.ln()
                    }
                    Function::Sqrt => {
                        if x < 0.0 {
                            return Err(self.domain(t, "square root of negative value"));
                        }
                        x.sqrt()
                    }
                    Function::Abs => x.abs(),
                    Function::Min | Function::Max => unreachable!("binary function with one argument"),
                }
            }
            Node::Call2(func, lhs, rhs) => {
                let a = lhs.eval(t)?;
                let b = rhs.eval(t)?;
                match func {
                    Function::Min => a.min(b),
                    Function::Max => a.max(b),
                    _ => unreachable!("unary function with two arguments"),
                }
            }
        };
        if !value.is_finite() {
            return Err(self.domain(t, "non-finite result"));
        }
        Ok(value)
    }

    fn domain(&self, t: f64, reason: &'static str) -> EvalError {
        EvalError {
            subexpr: self.to_string(),
            t,
            reason,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // Debug formatting of f64 is the shortest string that parses back
            // to the same value.
            Node::Number(x) => write!(f, "{x:?}"),
            Node::Var => f.write_str("t"),
            Node::Constant(Constant::Pi) => f.write_str("pi"),
            Node::Constant(Constant::E) => f.write_str("e"),
            Node::Neg(inner) => {
                f.write_str("-")?;
                inner.fmt_child(f, inner.precedence() < PREC_NEG)
            }
            Node::Binary(op, lhs, rhs) => {
                let prec = op.precedence();
                let (left_parens, right_parens) = if *op == BinaryOp::Pow {
                    (lhs.precedence() <= prec, rhs.precedence() < PREC_NEG)
                } else {
                    // Floating-point operations are not associative, so an
                    // equal-precedence right operand keeps its grouping.
                    (lhs.precedence() < prec, rhs.precedence() <= prec)
                };
                lhs.fmt_child(f, left_parens)?;
                f.write_str(op.symbol())?;
                rhs.fmt_child(f, right_parens)
            }
            Node::Call(func, arg) => write!(f, "{}({arg})", func.name()),
            Node::Call2(func, a, b) => write!(f, "{}({a}, {b})", func.name()),
        }
    }
}

/// An immutable, cheaply clonable parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Arc<Node>,
}

impl Expression {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parser::parse_node(text).map(Self::from_node)
    }

    pub fn from_node(node: Node) -> Self {
        Self {
            root: Arc::new(node),
        }
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    /// The identity function `t`.
    pub fn var() -> Self {
        Self::from_node(Node::Var)
    }

    /// A constant function. Panics if `value` is not finite.
    pub fn constant(value: f64) -> Self {
        assert!(value.is_finite(), "expression constants must be finite");
        Self::from_node(Node::Number(value))
    }

    pub fn binary(op: BinaryOp, lhs: &Expression, rhs: &Expression) -> Self {
        Self::from_node(Node::Binary(
            op,
            Box::new((*lhs.root).clone()),
            Box::new((*rhs.root).clone()),
        ))
    }

    pub fn add(&self, rhs: &Expression) -> Self {
        Self::binary(BinaryOp::Add, self, rhs)
    }

    pub fn sub(&self, rhs: &Expression) -> Self {
        Self::binary(BinaryOp::Sub, self, rhs)
    }

    pub fn mul(&self, rhs: &Expression) -> Self {
        Self::binary(BinaryOp::Mul, self, rhs)
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        self.root.eval(t)
    }

    /// True when the tree does not reference `t`.
    pub fn is_constant(&self) -> bool {
        fn walk(node: &Node) -> bool {
            match node {
                Node::Var => false,
                Node::Number(_) | Node::Constant(_) => true,
                Node::Neg(a) | Node::Call(_, a) => walk(a),
                Node::Binary(_, a, b) | Node::Call2(_, a, b) => walk(a) && walk(b),
            }
        }
        walk(&self.root)
    }

    /// Evaluates at [`PROBE_POINTS`] Chebyshev-spaced points of `[lower, upper]`.
    ///
    /// The points are interior, so open endpoints are never touched. Both
    /// bounds must be finite.
    pub fn probe(&self, lower: f64, upper: f64) -> Result<(), EvalError> {
        for t in chebyshev_points(lower, upper, PROBE_POINTS) {
            self.eval(t)?;
        }
        Ok(())
    }
}

/// Chebyshev points of the first kind mapped to `[lower, upper]`, ascending.
pub fn chebyshev_points(lower: f64, upper: f64, count: usize) -> impl Iterator<Item = f64> {
    let mid = 0.5 * (lower + upper);
    let half = 0.5 * (upper - lower);
    (0..count).map(move |k| {
        let theta = std::f64::consts::PI * (2 * (count - k) - 1) as f64 / (2 * count) as f64;
        mid + half * theta.cos()
    })
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl std::str::FromStr for Expression {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for Expression {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expression {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Expression::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(text: &str, t: f64) -> f64 {
        Expression::parse(text).unwrap().eval(t).unwrap()
    }

    #[test]
    fn identity_and_simple_sums() {
        assert_eq!(eval("t", 0.5), 0.5);
        assert_eq!(eval("sin(t)+t^2", 0.0), 0.0);
    }

    #[test]
    fn incomplete_input_reports_end_offset() {
        let err = Expression::parse("t +").unwrap_err();
        assert_eq!(err.offset, 3);
        assert!(matches!(err.kind, ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(eval("2^3^2", 0.3), 512.0);
        assert_eq!(eval("-2^2", 0.0), -4.0);
        assert_eq!(eval("2^-1", 0.0), 0.5);
    }

    #[test]
    fn precedence_of_products_and_sums() {
        assert_eq!(eval("1+2*3", 0.0), 7.0);
        assert_eq!(eval("8/4/2", 0.0), 1.0);
        assert_eq!(eval("8-4-2", 0.0), 2.0);
        assert_eq!(eval("-t*3", 2.0), -6.0);
        assert_eq!(eval("min(t, 1) + max(2, t)", 0.5), 2.5);
        assert_eq!(eval("pi", 0.0), std::f64::consts::PI);
        assert_eq!(eval("e", 0.0), std::f64::consts::E);
    }

    #[test]
    fn exp_matches_host() {
        assert_eq!(eval("exp(-t)", 1.0), 0.36787944117144233);
    }

    #[test]
    fn domain_errors() {
        let log = Expression::parse("log(t)").unwrap();
        let err = log.eval(0.0).unwrap_err();
        assert_eq!(err.subexpr, "log(t)");
        assert!(Expression::parse("1/t").unwrap().eval(0.0).is_err());
        assert!(Expression::parse("sqrt(t)").unwrap().eval(-1.0).is_err());
        assert!(Expression::parse("t^0.5").unwrap().eval(-1.0).is_err());
        assert_eq!(eval("t^2", -3.0), 9.0);
        assert!(Expression::parse("exp(t)").unwrap().eval(1000.0).is_err());
        let nested = Expression::parse("1 + sqrt(t - 2)").unwrap();
        assert_eq!(nested.eval(1.0).unwrap_err().subexpr, "sqrt(t-2.0)");
    }

    #[test]
    fn rejects_implicit_multiplication_and_unknown_names() {
        let err = Expression::parse("2t").unwrap_err();
        assert_eq!(err.offset, 1);
        let err = Expression::parse("1 + foo(t)").unwrap_err();
        assert_eq!(err.offset, 4);
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("foo".into()));
        assert!(Expression::parse("").is_err());
        assert!(Expression::parse("sin t").is_err());
        assert!(Expression::parse("min(t)").is_err());
        assert!(Expression::parse("(t").is_err());
    }

    #[test]
    fn pretty_print_keeps_grouping() {
        for text in ["t-(1-t)", "(2^3)^2", "(-2)^2", "-(t+1)", "t/(t*2)", "2^-t", "-(2^t)"] {
            let e = Expression::parse(text).unwrap();
            let again = Expression::parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{text} printed as {e}");
        }
        let c = Expression::constant(-0.5).mul(&Expression::var());
        assert_eq!(c.to_string(), "-0.5*t");
    }

    #[test]
    fn probe_avoids_endpoints() {
        let e = Expression::parse("log(t) + log(1 - t)").unwrap();
        e.probe(0.0, 1.0).unwrap();
        let pts: Vec<f64> = chebyshev_points(0.0, 1.0, 8).collect();
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        assert!(pts[0] > 0.0 && pts[7] < 1.0);
    }
}
