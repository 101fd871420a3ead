use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Domain(#[from] EvalError),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("density is negative ({value:e}) at t = {t}")]
    NegativeDensity { t: f64, value: f64 },

    #[error("total mass is not finite and positive: {0}")]
    DivergentMass(String),

    #[error("adaptive integration did not converge on [{lower}, {upper}] (estimated error {error:e})")]
    NonConvergence { lower: f64, upper: f64, error: f64 },

    #[error("interval exhaustion failed: {0}")]
    Exhaustion(String),

    #[error("combination does not reproduce its target (residual {residual:e})")]
    Infeasible { residual: f64 },

    #[error("frame basis is rank deficient (smallest/largest singular value {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("no zero crossing found on [{t0}, {t_stop}]")]
    NoCrossing { t0: f64, t_stop: f64 },

    #[error("reduced combination fails reconstruction (residual {residual:e})")]
    Reconstruction { residual: f64 },

    #[error("no grid up to {grid} points admits a non-negative exact correction")]
    DiscretizationCap { grid: usize },

    #[error("polishing failed to reach the exactness gate (worst scaled residual {residual:e})")]
    PolishFailed { residual: f64 },

    #[error("bisection failed: {0}")]
    Bisection(String),

    #[error("function `{function}` appears unbounded on the interval")]
    Unbounded { function: String },

    #[error("weights must be non-negative and sum to 1 (sum = {sum})")]
    WeightNormalization { sum: f64 },
}

impl Error {
    /// Stable machine-readable identifier for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse_error",
            Error::Domain(_) => "domain_error",
            Error::InvalidInput(_) => "invalid_input",
            Error::NegativeDensity { .. } => "negative_density",
            Error::DivergentMass(_) => "divergent_mass",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Exhaustion(_) => "exhaustion_failed",
            Error::Infeasible { .. } => "infeasible_combination",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NoCrossing { .. } => "no_crossing",
            Error::Reconstruction { .. } => "reconstruction_failed",
            Error::DiscretizationCap { .. } => "discretization_cap",
            Error::PolishFailed { .. } => "polish_failed",
            Error::Bisection(_) => "bisection_failed",
            Error::Unbounded { .. } => "unbounded_function",
            Error::WeightNormalization { .. } => "weight_normalization",
        }
    }

    /// Whether the error stems from malformed input rather than a numerical
    /// failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::InvalidInput(_) | Error::WeightNormalization { .. }
        )
    }
}
