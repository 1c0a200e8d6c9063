use thiserror::Error;

use crate::game::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game:\n{0}")]
    InvalidGame(ValidationReport),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("special prices (p_star, p_c) are not configured")]
    MissingSpecialPrices,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(
        "grim-trigger discount threshold undefined: best deviation payoff {deviation} \
         does not exceed the competitive payoff {competitive}"
    )]
    ThresholdUndefined { deviation: f64, competitive: f64 },

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e} (firm {firm})")]
    SolverResidual {
        firm: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// Short machine-readable tag used in structured CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGame(_) => "invalid_game",
            Error::Index(_) => "index",
            Error::Dimension(_) => "dimension",
            Error::MissingSpecialPrices => "missing_special_prices",
            Error::Unsupported(_) => "unsupported",
            Error::ThresholdUndefined { .. } => "threshold_undefined",
            Error::InvalidPolicy(_) => "invalid_policy",
            Error::InvalidSchedule(_) => "invalid_schedule",
            Error::SolverResidual { .. } => "solver_residual",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Config(_) => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::TomlDe(_) | Error::TomlSer(_) => "toml",
        }
    }
}
