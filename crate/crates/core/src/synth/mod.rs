//! Synthesis of exact quadrature rules with non-negative weights.
//!
//! [`synthesize_rule`] runs the full pipeline: integrals, affine rank,
//! a reproducing discretization of the normalized integral vector, finite
//! Carathéodory thinning, one sliding reduction on the curve and a
//! Gauss-Newton polish. The rule returned is one of infinitely many valid
//! ones; the pipeline is deterministic, so the same input always gives the
//! same rule.

mod discretize;
mod polish;
mod rank;
mod whiten;

pub use discretize::{discretize_hull_point, integral_sum, interiority_check, HullSample, Interiority};
pub use rank::{affine_rank_on, AffineRankReport, Dependency};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hull::{caratheodory_finite, reduce_on_curve, ConvexCombination, CurveSystem, HullConfig};
use crate::measure::{IntervalSpec, MeasureSpec};
use crate::RealVector;
use discretize::discretize_mapped;
use whiten::{whiten, WhitenedCurve, Whitening};

/// Tolerances and limits for [`synthesize_rule`] and [`verify_rule`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Relative tolerance for the integrals the rule is built from.
    pub integration: f64,
    /// Relative tolerance for the independent integrals in [`verify_rule`].
    pub reference: f64,
    /// Relative singular-value threshold for rank decisions.
    pub rank: f64,
    /// Equal cells of the working interval probed for affine rank.
    pub probe_cells: usize,
    /// Initial and maximal number of discretization cells.
    pub grid: usize,
    pub max_grid: usize,
    /// Residual allowed for the corrected discretization, relative to
    /// `1 + |J / mu(I)|`.
    pub correction: f64,
    pub polish_max_iter: usize,
    pub polish_tol: f64,
    /// Per-function acceptance: `|residual_k| <= gate * (1 + |J_k|)`.
    pub gate: f64,
    /// Allowed relative error of the weight sum.
    pub weight_sum: f64,
    pub hull: HullConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            integration: 1e-10,
            reference: 1e-12,
            rank: 1e-10,
            probe_cells: 512,
            grid: 64,
            max_grid: 1 << 18,
            correction: 1e-11,
            polish_max_iter: 200,
            polish_tol: 1e-12,
            gate: 1e-8,
            weight_sum: 1e-10,
            hull: HullConfig::default(),
        }
    }
}

/// `int_I x_k dmu = sum_i weights[i] * x_k(nodes[i])` for every `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `mu(I)`, the sum of the weights.
    pub total: f64,
    /// `|sum_i weights[i] x_k(nodes[i]) - J_k|` for every function.
    pub residuals: Vec<f64>,
    /// Number of affinely independent functions the rule was built for.
    pub rank_used: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Per-function check of a rule against independently recomputed integrals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub integrals: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Indices of functions whose residual exceeds the gate.
    pub failing_functions: Vec<usize>,
    /// `|sum weights - mu(I)| / mu(I)`.
    pub weight_sum_error: f64,
    pub negative_weights: Vec<usize>,
    pub nodes_outside: Vec<usize>,
    /// Whether the rule has at most as many nodes as functions.
    pub node_count_ok: bool,
    pub passed: bool,
}

/// Affine rank of `curve` on the support of `m`, probed on the compact
/// working interval (the exhaustion window when `I` is not compact).
pub fn affine_rank(curve: &CurveSystem, m: &MeasureSpec, config: &SynthConfig) -> Result<AffineRankReport> {
    let (_, window) = m.exhaust_interval(curve, config.integration)?;
    affine_rank_on(curve, m, &window, config.probe_cells, config.rank)
}

/// Builds a rule with at most `n` nodes in `I`, non-negative weights summing
/// to `mu(I)`, exact for every component of `curve`.
pub fn synthesize_rule(curve: &CurveSystem, m: &MeasureSpec, config: &SynthConfig) -> Result<QuadratureRule> {
    let n = curve.components().len();
    let interval = *m.interval();
    let (j, mass, window) = if interval.is_compact() {
        let moments = m.moments(curve.components(), config.integration)?;
        (RealVector::from_vec(moments.values), moments.mass, interval)
    } else {
        let (jv, window) = m.exhaust_interval(curve, config.integration)?;
        (jv.values, m.total_mass_with_tol(config.integration)?, window)
    };
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::DivergentMass(format!("mu(I) = {mass}")));
    }
    curve.probe(&window)?;
    let mean_all = &j / mass;

    let report = affine_rank_on(curve, m, &window, config.probe_cells, config.rank)?;
    let mut independent = report.independent_indices.clone();
    let mut notes = Vec::new();
    let mut worst = f64::INFINITY;

    // Each pass either returns a rule or removes one function: one the
    // samples show to be affinely dependent on the others, or, when no
    // candidate meets the gate, the one dominating the thinnest direction of
    // a hull too thin to resolve. Every rule is gated on all `n` functions.
    loop {
        if independent.is_empty() {
            let t = support_point(m, &window, config.probe_cells)?;
            let rule = finish_rule(curve, &[t], &[1.0], mass, &j, 0, notes)?;
            if gate_excess(&rule, &j, config) <= 1.0 {
                return Ok(rule);
            }
            return Err(Error::PolishFailed {
                residual: worst.min(gate_excess(&rule, &j, config) * config.gate),
            });
        }
        let sub = curve.select(&independent);
        let mean = RealVector::from_iterator(independent.len(), independent.iter().map(|&k| mean_all[k]));
        let (whitening, candidates) = match hull_representation(&sub, m, &window, &mean, mass, config)? {
            Representation::Found { whitening, candidates } => (whitening, candidates),
            Representation::Boundary { dominant } => {
                independent.remove(dominant);
                continue;
            }
        };
        let white = WhitenedCurve {
            curve: &sub,
            whitening: &whitening,
        };
        let origin = RealVector::zeros(mean.len());
        // The reduced combination comes first. When it misses a dependent
        // function (dependence may hold only on the support of the measure)
        // the unreduced one, whose nodes lie on the support, is tried next.
        for comb in candidates {
            let out = polish::polish(
                &white,
                &interval,
                &comb.params,
                &comb.weights,
                &origin,
                config.polish_max_iter,
                config.polish_tol,
            )?;
            if out.params.len() > n {
                continue;
            }
            let mut warnings = notes.clone();
            if !out.converged {
                warnings.push(format!(
                    "polish stopped at scaled residual {:e} above {:e}",
                    out.residual, config.polish_tol
                ));
            }
            let rule = finish_rule(curve, &out.params, &out.weights, mass, &j, independent.len(), warnings)?;
            let excess = gate_excess(&rule, &j, config);
            if excess <= 1.0 {
                return Ok(rule);
            }
            worst = worst.min(excess * config.gate);
        }
        let dropped = independent.remove(whitening.thinnest);
        notes.push(format!(
            "function {dropped} treated as dependent: the hull is too thin in its direction to meet the gate"
        ));
    }
}

enum Representation {
    /// Combinations of whitened curve points averaging to the origin: the
    /// reduced one first, then the unreduced one when it differs.
    Found {
        whitening: Whitening,
        candidates: Vec<ConvexCombination>,
    },
    Boundary { dominant: usize },
}

fn hull_representation(
    sub: &CurveSystem,
    m: &MeasureSpec,
    window: &IntervalSpec,
    mean: &RealVector,
    mass: f64,
    config: &SynthConfig,
) -> Result<Representation> {
    let n1 = mean.len();
    // All hull steps run in coordinates where the weighted samples have unit
    // spread; convex combinations do not change under the affine map, and
    // nearly dependent functions no longer make the hull thin.
    let raw = integral_sum(sub, m, window, config.grid.max(n1 + 2), 1.0)?;
    let whitening = match whiten(&raw.points, &raw.weights, mean, config.rank) {
        Ok(w) => w,
        Err(flat) => return Ok(Representation::Boundary { dominant: flat.dominant }),
    };
    let origin = RealVector::zeros(n1);
    let sample = match discretize_mapped(
        sub,
        m,
        window,
        &origin,
        mass,
        config.grid,
        config.max_grid,
        config.correction,
        |x| whitening.apply(&x),
    ) {
        Ok(s) => s,
        Err(Error::DiscretizationCap { grid }) => {
            // Numerically on the boundary: drop the coordinate the thinnest
            // direction of the finest sample points at.
            let finest = integral_sum(sub, m, window, grid, mass)?;
            let total: f64 = finest.weights.iter().sum();
            return Ok(match interiority_check(&finest.points, &finest.weights, &(mean * total), total, 1.0) {
                Interiority::Boundary { dominant, .. } => Representation::Boundary { dominant },
                Interiority::Interior => Representation::Boundary { dominant: n1 - 1 },
            });
        }
        Err(e) => return Err(e),
    };

    // Reconstruction is checked against the rounding the whitening
    // amplifies; the polish and the final gate work in original units.
    let hull = HullConfig {
        reconstruction: config.hull.reconstruction.max(1e3 * whitening.noise),
        ..config.hull
    };
    let selection = caratheodory_finite(&sample.points, &sample.weights, &origin, hull.reconstruction, config.rank)?;
    let params = selection.indices.iter().map(|&i| sample.params[i]).collect();
    let unreduced = ConvexCombination::new(params, selection.weights)?;
    if unreduced.len() <= n1 {
        return Ok(Representation::Found {
            whitening,
            candidates: vec![unreduced],
        });
    }
    let white = WhitenedCurve {
        curve: sub,
        whitening: &whitening,
    };
    let reduced = reduce_on_curve(&white, &unreduced, &origin, &hull)?;
    Ok(Representation::Found {
        whitening,
        candidates: vec![reduced, unreduced],
    })
}

/// A point where `m` has mass: the first atom, or else the positive-density
/// probe nearest the middle of `window`.
fn support_point(m: &MeasureSpec, window: &IntervalSpec, cells: usize) -> Result<f64> {
    let probes = rank::support_probes(m, window, cells)?;
    if m.density().is_none() {
        return probes
            .first()
            .copied()
            .ok_or_else(|| Error::InvalidInput("measure has no mass in the working interval".into()));
    }
    let mid = 0.5 * (window.lower + window.upper);
    probes
        .iter()
        .copied()
        .min_by(|a, b| (a - mid).abs().total_cmp(&(b - mid).abs()))
        .ok_or_else(|| Error::InvalidInput("density vanishes on the working interval".into()))
}

fn finish_rule(
    curve: &CurveSystem,
    params: &[f64],
    weights: &[f64],
    mass: f64,
    j: &RealVector,
    rank_used: usize,
    warnings: Vec<String>,
) -> Result<QuadratureRule> {
    let comb = ConvexCombination::new(params.to_vec(), weights.to_vec())?;
    let sum = comb.total;
    let weights: Vec<f64> = comb.weights.iter().map(|w| w / sum * mass).collect();
    let total: f64 = weights.iter().sum();
    let residuals = rule_residuals(curve, &comb.params, &weights, j)?;
    Ok(QuadratureRule {
        nodes: comb.params,
        weights,
        total,
        residuals,
        rank_used,
        warnings,
    })
}

fn rule_residuals(curve: &CurveSystem, nodes: &[f64], weights: &[f64], j: &RealVector) -> Result<Vec<f64>> {
    let n = j.len();
    let mut acc = vec![0.0; n];
    let mut row = vec![0.0; n];
    for (&t, &w) in nodes.iter().zip(weights) {
        curve.eval_into(t, &mut row)?;
        for k in 0..n {
            acc[k] += w * row[k];
        }
    }
    Ok((0..n).map(|k| (acc[k] - j[k]).abs()).collect())
}

/// Largest `residual_k / (gate * (1 + |J_k|))`.
fn gate_excess(rule: &QuadratureRule, j: &RealVector, config: &SynthConfig) -> f64 {
    rule.residuals
        .iter()
        .zip(j.iter())
        .map(|(r, jk)| r / (config.gate * (1.0 + jk.abs())))
        .fold(0.0, f64::max)
}

/// Checks `rule` against integrals recomputed at `config.reference`.
pub fn verify_rule(
    rule: &QuadratureRule,
    curve: &CurveSystem,
    m: &MeasureSpec,
    config: &SynthConfig,
) -> Result<VerifyReport> {
    if rule.nodes.len() != rule.weights.len() {
        return Err(Error::InvalidInput(format!(
            "rule has {} nodes but {} weights",
            rule.nodes.len(),
            rule.weights.len()
        )));
    }
    let n = curve.components().len();
    let j = m.integrate_system(curve, config.reference)?.values;
    let mass = m.total_mass_with_tol(config.reference)?;
    let interval = m.interval();
    let nodes_outside: Vec<usize> = (0..rule.nodes.len()).filter(|&i| !interval.contains(rule.nodes[i])).collect();
    let negative_weights: Vec<usize> = (0..rule.weights.len()).filter(|&i| !(rule.weights[i] >= 0.0)).collect();

    // Nodes outside the interval may be outside the functions' domains too;
    // those residuals are reported as infinite.
    let mut residuals = vec![0.0; n];
    let mut acc = vec![0.0; n];
    let mut row = vec![0.0; n];
    let mut evaluable = true;
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        if curve.eval_into(t, &mut row).is_err() {
            evaluable = false;
            break;
        }
        for k in 0..n {
            acc[k] += w * row[k];
        }
    }
    for k in 0..n {
        residuals[k] = if evaluable { (acc[k] - j[k]).abs() } else { f64::INFINITY };
    }
    let failing_functions: Vec<usize> = (0..n)
        .filter(|&k| !(residuals[k] <= config.gate * (1.0 + j[k].abs())))
        .collect();
    let weight_sum: f64 = rule.weights.iter().sum();
    let weight_sum_error = (weight_sum - mass).abs() / mass;
    let node_count_ok = rule.nodes.len() <= n;
    let passed = failing_functions.is_empty()
        && negative_weights.is_empty()
        && nodes_outside.is_empty()
        && node_count_ok
        && weight_sum_error <= config.weight_sum;
    Ok(VerifyReport {
        integrals: j.iter().copied().collect(),
        residuals,
        failing_functions,
        weight_sum_error,
        negative_weights,
        nodes_outside,
        node_count_ok,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;
    use crate::Atom;
    use std::f64::consts::PI;

    fn unit() -> IntervalSpec {
        IntervalSpec::closed(0.0, 1.0).unwrap()
    }

    #[test]
    fn mean_of_uniform() {
        let curve = CurveSystem::parse(&["t"], unit()).unwrap();
        let m = MeasureSpec::lebesgue(unit());
        let rule = synthesize_rule(&curve, &m, &SynthConfig::default()).unwrap();
        assert_eq!(rule.nodes.len(), 1);
        assert!((rule.nodes[0] - 0.5).abs() < 1e-12);
        assert!((rule.weights[0] - 1.0).abs() < 1e-12);
        assert_eq!(rule.rank_used, 1);

        let report = verify_rule(&rule, &curve, &m, &SynthConfig::default()).unwrap();
        assert!(report.passed);
        assert!(report.residuals[0] <= 1e-12);
    }

    #[test]
    fn circle_arc() {
        let i = IntervalSpec::closed(0.0, PI).unwrap();
        let curve = CurveSystem::parse(&["cos(t)", "sin(t)"], i).unwrap();
        let m = MeasureSpec::lebesgue(i);
        let rule = synthesize_rule(&curve, &m, &SynthConfig::default()).unwrap();
        assert!(rule.nodes.len() <= 2);
        assert!(rule.weights.iter().all(|w| *w >= 0.0));
        assert!((rule.weights.iter().sum::<f64>() - PI).abs() < 1e-10 * PI);
        let c: f64 = rule.nodes.iter().zip(&rule.weights).map(|(t, w)| w * t.cos()).sum();
        let s: f64 = rule.nodes.iter().zip(&rule.weights).map(|(t, w)| w * t.sin()).sum();
        assert!(c.abs() < 1e-8);
        assert!((s - 2.0).abs() < 1e-8 * 3.0);
    }

    #[test]
    fn lebesgue_weights_sum_to_length() {
        let i = IntervalSpec::closed(-1.0, 2.5).unwrap();
        let curve = CurveSystem::parse(&["t", "t^2", "exp(t)"], i).unwrap();
        let rule = synthesize_rule(&curve, &MeasureSpec::lebesgue(i), &SynthConfig::default()).unwrap();
        assert!(rule.nodes.len() <= 3);
        assert!((rule.total - 3.5).abs() <= 1e-10 * 3.5);
    }

    #[test]
    fn constant_system_gives_one_node() {
        let curve = CurveSystem::parse(&["1", "2"], unit()).unwrap();
        let m = MeasureSpec::with_density(unit(), Expression::parse("1 + t").unwrap()).unwrap();
        let rule = synthesize_rule(&curve, &m, &SynthConfig::default()).unwrap();
        assert_eq!(rule.nodes.len(), 1);
        assert_eq!(rule.rank_used, 0);
        assert!((rule.total - 1.5).abs() < 1e-12);
    }

    #[test]
    fn collinear_system_reduces_rank() {
        let curve = CurveSystem::parse(&["t", "2*t"], unit()).unwrap();
        let m = MeasureSpec::lebesgue(unit());
        let rule = synthesize_rule(&curve, &m, &SynthConfig::default()).unwrap();
        assert_eq!(rule.rank_used, 1);
        assert_eq!(rule.nodes.len(), 1);
        assert!((rule.nodes[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn single_atom() {
        let m = MeasureSpec::atomic(unit(), vec![Atom { t: 0.3, mass: 2.0 }]).unwrap();
        let curve = CurveSystem::parse(&["t", "sin(t)"], unit()).unwrap();
        let rule = synthesize_rule(&curve, &m, &SynthConfig::default()).unwrap();
        assert_eq!(rule.nodes, vec![0.3]);
        assert_eq!(rule.weights, vec![2.0]);
    }

    #[test]
    fn dependence_only_on_the_atoms() {
        // On two atoms t^2 is affine in t, but not between them.
        let atoms = vec![Atom { t: 0.2, mass: 1.0 }, Atom { t: 0.7, mass: 2.0 }];
        let m = MeasureSpec::atomic(unit(), atoms).unwrap();
        let curve = CurveSystem::parse(&["t", "t^2", "exp(t)"], unit()).unwrap();
        let config = SynthConfig::default();
        let rule = synthesize_rule(&curve, &m, &config).unwrap();
        assert!(rule.nodes.len() <= 3);
        assert!(verify_rule(&rule, &curve, &m, &config).unwrap().passed);
    }

    #[test]
    fn perturbed_weight_is_flagged() {
        let i = IntervalSpec::closed(0.0, 2.0).unwrap();
        let curve = CurveSystem::parse(&["t", "t^3"], i).unwrap();
        let m = MeasureSpec::lebesgue(i);
        let config = SynthConfig::default();
        let mut rule = synthesize_rule(&curve, &m, &config).unwrap();
        assert!(verify_rule(&rule, &curve, &m, &config).unwrap().passed);
        rule.weights[0] += 1e-3;
        let report = verify_rule(&rule, &curve, &m, &config).unwrap();
        assert!(!report.passed);
        assert_eq!(report.failing_functions, vec![0, 1]);
    }

    #[test]
    fn rule_json_shape() {
        let rule = QuadratureRule {
            nodes: vec![0.5],
            weights: vec![1.0],
            total: 1.0,
            residuals: vec![0.0],
            rank_used: 1,
            warnings: vec![],
        };
        let text = serde_json::to_string(&rule).unwrap();
        assert_eq!(
            text,
            r#"{"nodes":[0.5],"weights":[1.0],"total":1.0,"residuals":[0.0],"rank_used":1}"#
        );
        assert_eq!(serde_json::from_str::<QuadratureRule>(&text).unwrap(), rule);
    }
}
