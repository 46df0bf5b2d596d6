use thiserror::Error;

use crate::shooting::ShootingState;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be ≥ 3 (got {0})")]
    Dimension(u32),

    #[error("ball radius must be positive and finite (got {0})")]
    Radius(f64),

    #[error("invalid radial grid: {0}")]
    Grid(String),

    #[error("invalid radial profile: {0}")]
    Profile(String),

    #[error("kernel singularity: {0}")]
    Singularity(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("integration failed at r = {r}: {reason}", r = .state.r)]
    Integration { state: ShootingState, reason: String },

    #[error("U(r0) = {u_at_r0} does not exceed 1, no positive multiplier exists")]
    NoPositiveLambda { u_at_r0: f64 },

    #[error("no amplitude bracket found: {0}")]
    Bracket(String),

    #[error("bisection did not converge: {0}")]
    Convergence(String),

    #[error("separatrix search failed: {reason} (amplitude interval [{lo}, {hi}], tail {tail})")]
    Separatrix {
        reason: String,
        lo: f64,
        hi: f64,
        tail: String,
    },

    #[error("{what} did not converge after {iterations} iterations (last residual {last:e})", last = .history.last().copied().unwrap_or(f64::NAN))]
    Iterative {
        what: &'static str,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Radius(_) => "radius",
            Error::Grid(_) => "grid",
            Error::Profile(_) => "profile",
            Error::Singularity(_) => "singularity",
            Error::Domain(_) => "domain",
            Error::Degenerate(_) => "degenerate",
            Error::Integration { .. } => "integration",
            Error::NoPositiveLambda { .. } => "no_positive_lambda",
            Error::Bracket(_) => "bracket",
            Error::Convergence(_) => "convergence",
            Error::Separatrix { .. } => "separatrix",
            Error::Iterative { .. } => "iterative",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    /// True for input/validation failures as opposed to numerical ones.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_)
                | Error::Radius(_)
                | Error::Grid(_)
                | Error::Profile(_)
                | Error::Domain(_)
                | Error::Parse(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
