use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use meanquad::chebyshev::chebyshev_sample_test;
use meanquad::hull::{reduce_on_curve, HullConfig};
use meanquad::stats::{covariance_witness, gruss_check, gruss_discrete};
use meanquad::synth::{synthesize_rule, verify_rule, QuadratureRule, SynthConfig};
use meanquad::{ConvexCombination, CurveSystem, Expression, IntervalSpec, MeasureSpec, RealVector};
use serde::{Deserialize, Serialize};

/// Exact quadrature rules with non-negative weights, covariance witnesses
/// and Grüss checks.
///
/// Each subcommand reads a JSON problem file (`-` for standard input),
/// writes the JSON result to standard output and a short summary to
/// standard error. Exit status is 0 on success, 2 for invalid input and 3
/// for numerical failure; failures print {"kind", "message", "offset"?} to
/// standard error.
#[derive(Parser)]
#[command(name = "meanquad", version)]
struct Cli {
    /// Overrides the main tolerance of the command: the integration
    /// tolerance for synthesize and covwitness, the reference tolerance for
    /// verify, the reconstruction tolerance for reduce.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Overrides the initial discretization grid.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Overrides the seed of chebyshev-test.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a rule: {"functions", "measure", "tolerances"?}
    Synthesize { file: PathBuf },
    /// Reduce n+1 curve points to at most n:
    /// {"functions", "interval", "combination", "target"?, "tolerances"?}
    Reduce { file: PathBuf },
    /// Covariance witness t1, t2: {"f", "g", "measure", "tolerances"?}
    Covwitness { file: PathBuf },
    /// Grüss bound for a measure: {"f", "g", "measure"}
    Gruss { file: PathBuf },
    /// Discrete Grüss bound: {"p", "u", "v"}
    GrussDiscrete { file: PathBuf },
    /// Check a rule against recomputed integrals:
    /// {"functions", "measure", "rule", "tolerances"?}
    Verify { file: PathBuf },
    /// Random search for a vanishing determinant:
    /// {"functions", "interval", "trials", "seed"?}
    ChebyshevTest { file: PathBuf },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthProblem {
    functions: Vec<Expression>,
    measure: MeasureSpec,
    #[serde(default)]
    tolerances: SynthConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReduceProblem {
    functions: Vec<Expression>,
    interval: IntervalSpec,
    combination: ConvexCombination,
    /// Normalized target; defaults to the mean of the combination.
    target: Option<Vec<f64>>,
    #[serde(default)]
    tolerances: HullConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairProblem {
    f: Expression,
    g: Expression,
    measure: MeasureSpec,
    #[serde(default)]
    tolerances: SynthConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GrussProblem {
    f: Expression,
    g: Expression,
    measure: MeasureSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscreteProblem {
    p: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyProblem {
    functions: Vec<Expression>,
    measure: MeasureSpec,
    rule: QuadratureRule,
    #[serde(default)]
    tolerances: SynthConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChebyshevProblem {
    functions: Vec<Expression>,
    interval: IntervalSpec,
    trials: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct Failure {
    kind: String,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    offset: Option<usize>,
    #[serde(skip)]
    code: u8,
}

impl Failure {
    fn validation(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
            offset: None,
            code: 2,
        }
    }

    fn json(err: serde_json::Error, text: &str) -> Self {
        let kind = match err.classify() {
            serde_json::error::Category::Data => "schema_error",
            _ => "malformed_json",
        };
        Self {
            kind: kind.into(),
            offset: Some(byte_offset(text, err.line(), err.column())),
            message: err.to_string(),
            code: 2,
        }
    }
}

impl From<meanquad::Error> for Failure {
    fn from(err: meanquad::Error) -> Self {
        let offset = match &err {
            meanquad::Error::Parse(p) => Some(p.offset),
            _ => None,
        };
        Self {
            kind: err.kind().into(),
            message: err.to_string(),
            offset,
            code: if err.is_validation() { 2 } else { 3 },
        }
    }
}

/// 0-based byte offset of serde_json's 1-based line and column.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let before: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (before + column.saturating_sub(1)).min(text.len())
}

fn read_problem<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let mut text = String::new();
    let read = if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    read.map_err(|e| Failure::validation("io_error", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::json(e, &text))
}

fn positive(name: &str, value: f64) -> Result<f64, Failure> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Failure::validation("invalid_input", format!("--{name} must be positive and finite, got {value}")))
    }
}

fn emit<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("results serialize"));
}

fn synth_config(cli: &Cli, mut config: SynthConfig) -> Result<SynthConfig, Failure> {
    if let Some(tol) = cli.tol {
        config.integration = positive("tol", tol)?;
    }
    if let Some(grid) = cli.grid {
        if grid == 0 {
            return Err(Failure::validation("invalid_input", "--grid must be positive"));
        }
        config.grid = grid;
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Synthesize { file } => {
            let p: SynthProblem = read_problem(file)?;
            let config = synth_config(cli, p.tolerances)?;
            let curve = CurveSystem::new(p.functions, *p.measure.interval())?;
            let rule = synthesize_rule(&curve, &p.measure, &config)?;
            let worst = rule.residuals.iter().copied().fold(0.0, f64::max);
            eprintln!(
                "{} nodes for {} functions (rank {}), max residual {worst:.3e}",
                rule.nodes.len(),
                curve.components().len(),
                rule.rank_used
            );
            for w in &rule.warnings {
                eprintln!("warning: {w}");
            }
            emit(&rule);
        }
        Command::Reduce { file } => {
            let p: ReduceProblem = read_problem(file)?;
            let mut config = p.tolerances;
            if let Some(tol) = cli.tol {
                config.reconstruction = positive("tol", tol)?;
            }
            let curve = CurveSystem::new(p.functions, p.interval)?;
            let n = curve.components().len();
            let given = p.combination;
            let comb = ConvexCombination::new(given.params, given.weights)?;
            if (comb.total - given.total).abs() > 1e-12 * comb.total.abs().max(1.0) {
                return Err(Failure::validation(
                    "invalid_input",
                    format!("combination total {} differs from its weight sum {}", given.total, comb.total),
                ));
            }
            if let Some(t) = comb.params.iter().find(|t| !p.interval.contains(**t)) {
                return Err(Failure::validation("invalid_input", format!("parameter {t} lies outside {}", p.interval)));
            }
            let target = match p.target {
                Some(v) if v.len() != n => {
                    return Err(Failure::validation(
                        "invalid_input",
                        format!("target has {} coordinates, expected {n}", v.len()),
                    ))
                }
                Some(v) => RealVector::from_vec(v),
                None => comb.mean(&curve)?,
            };
            let reduced = reduce_on_curve(&curve, &comb, &target, &config)?;
            eprintln!("{} points reduced to {}", comb.len(), reduced.len());
            emit(&reduced);
        }
        Command::Covwitness { file } => {
            let p: PairProblem = read_problem(file)?;
            let config = synth_config(cli, p.tolerances)?;
            let w = covariance_witness(&p.f, &p.g, &p.measure, &config)?;
            eprintln!("Cov = {:.6e} at t1 = {}, t2 = {}", w.covariance, w.t1, w.t2);
            emit(&w);
        }
        Command::Gruss { file } => {
            let p: GrussProblem = read_problem(file)?;
            let r = gruss_check(&p.f, &p.g, &p.measure)?;
            eprintln!("|Cov| = {:.6e} <= bound {:.6e} (slack {:.3e})", r.covariance.abs(), r.bound, r.slack);
            emit(&r);
        }
        Command::GrussDiscrete { file } => {
            let p: DiscreteProblem = read_problem(file)?;
            let r = gruss_discrete(&p.p, &p.u, &p.v)?;
            eprintln!("lhs {:.6e} <= bound {:.6e} (slack {:.3e})", r.lhs, r.bound, r.slack);
            emit(&r);
        }
        Command::Verify { file } => {
            let p: VerifyProblem = read_problem(file)?;
            let mut config = p.tolerances;
            if let Some(tol) = cli.tol {
                config.reference = positive("tol", tol)?;
            }
            let curve = CurveSystem::new(p.functions, *p.measure.interval())?;
            let report = verify_rule(&p.rule, &curve, &p.measure, &config)?;
            emit(&report);
            if !report.passed {
                let worst = report.residuals.iter().copied().fold(0.0, f64::max);
                return Err(Failure {
                    kind: "verification_failed".into(),
                    message: format!(
                        "failing functions {:?}, negative weights {:?}, nodes outside {:?}, node count ok {}, weight sum error {:e}, max residual {worst:e}",
                        report.failing_functions,
                        report.negative_weights,
                        report.nodes_outside,
                        report.node_count_ok,
                        report.weight_sum_error
                    ),
                    offset: None,
                    code: 3,
                });
            }
            eprintln!("rule passes all {} functions", curve.components().len());
        }
        Command::ChebyshevTest { file } => {
            let p: ChebyshevProblem = read_problem(file)?;
            let seed = cli.seed.unwrap_or(p.seed);
            let curve = CurveSystem::new(p.functions, p.interval)?;
            let r = chebyshev_sample_test(&curve, p.trials, seed)?;
            match &r.witness {
                Some(w) => eprintln!("determinant vanishes at {:?}: not a Chebyshev system", w.tuple),
                None => eprintln!("no vanishing determinant in {} trials (evidence only)", r.trials),
            }
            emit(&r);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", serde_json::to_string(&f).expect("errors serialize"));
            ExitCode::from(f.code)
        }
    }
}
