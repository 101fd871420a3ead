//! Test-side oracles and random problem generators.
#![allow(dead_code)]

use meanquad::{Atom, CurveSystem, Expression, IntervalSpec, MeasureSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// from Newton iteration on the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Composite 20-point Gauss-Legendre on `[a, b]`, doubling the panel count
/// until two successive values agree to about machine precision.
pub fn oracle_integral(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (x, w) = gauss_legendre(20);
    let composite = |panels: usize| -> f64 {
        let h = (b - a) / panels as f64;
        let mut sum = 0.0;
        for p in 0..panels {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            for (xi, wi) in x.iter().zip(&w) {
                sum += wi * f(mid + 0.5 * h * xi);
            }
        }
        0.5 * h * sum
    };
    let mut panels = 4;
    let mut prev = composite(panels);
    while panels < 1 << 14 {
        panels *= 2;
        let next = composite(panels);
        if (next - prev).abs() <= 1e-14 * (1.0 + next.abs()) {
            return next;
        }
        prev = next;
    }
    prev
}

/// A randomized synthesis problem on a compact interval.
#[derive(Debug, Clone)]
pub struct Problem {
    pub functions: Vec<String>,
    pub lower: f64,
    pub upper: f64,
    pub density: String,
    pub atoms: Vec<(f64, f64)>,
}

impl Problem {
    pub fn interval(&self) -> IntervalSpec {
        IntervalSpec::closed(self.lower, self.upper).unwrap()
    }

    pub fn measure(&self) -> MeasureSpec {
        let atoms = self.atoms.iter().map(|&(t, mass)| Atom { t, mass }).collect();
        MeasureSpec::new(self.interval(), Some(Expression::parse(&self.density).unwrap()), atoms).unwrap()
    }

    pub fn curve(&self) -> CurveSystem {
        CurveSystem::parse(&self.functions, self.interval()).unwrap()
    }

    /// `mu(I)` and `int x_k dmu` from the oracle plus exact atom sums.
    pub fn reference(&self) -> (f64, Vec<f64>) {
        let w = Expression::parse(&self.density).unwrap();
        let atom_mass: f64 = self.atoms.iter().map(|a| a.1).sum();
        let mass = oracle_integral(|t| w.eval(t).unwrap(), self.lower, self.upper) + atom_mass;
        let j = self
            .functions
            .iter()
            .map(|s| {
                let f = Expression::parse(s).unwrap();
                let dens = oracle_integral(|t| w.eval(t).unwrap() * f.eval(t).unwrap(), self.lower, self.upper);
                dens + self.atoms.iter().map(|&(t, m)| m * f.eval(t).unwrap()).sum::<f64>()
            })
            .collect();
        (mass, j)
    }
}

fn num(x: f64) -> String {
    format!("{x:.3}")
}

/// A function from the polynomial, trigonometric or exponential family.
pub fn random_function(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..5) {
        0 => format!("t^{}", rng.gen_range(1..=5)),
        1 => format!(
            "{} + {}*t + {}*t^2",
            num(rng.gen_range(-1.0..1.0)),
            num(rng.gen_range(-2.0..2.0)),
            num(rng.gen_range(-2.0..2.0))
        ),
        2 => format!("sin({}*t + {})", num(rng.gen_range(0.5..3.0)), num(rng.gen_range(-1.5..1.5))),
        3 => format!("cos({}*t + {})", num(rng.gen_range(0.5..3.0)), num(rng.gen_range(-1.5..1.5))),
        _ => format!("exp({}*t)", num(rng.gen_range(-1.5..1.5))),
    }
}

/// `n` distinct functions.
pub fn random_functions(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(n);
    while out.len() < n {
        let f = random_function(rng);
        if !out.contains(&f) {
            out.push(f);
        }
    }
    out
}

/// A polynomial density positive on `[a, b]`: non-negative combinations of
/// `1`, `s` and `(1 - s)^2` with `s = (t - a) / (b - a)`.
pub fn random_density(rng: &mut ChaCha8Rng, a: f64, b: f64) -> String {
    let s = format!("((t - ({})) / {})", num(a), num(b - a));
    format!(
        "{} + {}*{s} + {}*(1 - {s})^2",
        num(rng.gen_range(0.2..2.0)),
        num(rng.gen_range(0.0..2.0)),
        num(rng.gen_range(0.0..2.0))
    )
}

pub fn random_interval(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let a: f64 = (rng.gen_range(-2.0..2.0) * 1000.0_f64).round() / 1000.0;
    let len: f64 = (rng.gen_range(0.5..3.0) * 1000.0_f64).round() / 1000.0;
    (a, a + len)
}

pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, atoms: bool) -> Problem {
    let (lower, upper) = random_interval(rng);
    let functions = random_functions(rng, n);
    let density = random_density(rng, lower, upper);
    let atoms = if atoms {
        let k = rng.gen_range(1..=3);
        (0..k)
            .map(|_| (rng.gen_range(lower..upper), rng.gen_range(0.05..1.0)))
            .collect()
    } else {
        Vec::new()
    };
    Problem {
        functions,
        lower,
        upper,
        density,
        atoms,
    }
}
