//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A required configuration key is absent.
    #[error("configuration error: missing key `{0}`")]
    MissingKey(String),

    /// A configuration key is present but cannot be parsed or is out of range.
    #[error("configuration error: invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },

    /// A physics invariant is violated by otherwise well-formed inputs.
    #[error("validation error: {0}")]
    Validation(String),

    /// General configuration problem not tied to a single key.
    #[error("configuration error: {0}")]
    Config(String),

    /// Evolution and rates are defined for t >= 0 only.
    #[error("domain error: t = {0} is negative; decay times must be >= 0")]
    NegativeTime(f64),

    /// Both production rates vanished at the same instant.
    #[error("degenerate asymmetry: vanishing rate denominator at t = {t}")]
    DegenerateAsymmetry { t: f64 },

    /// 1 - eps_s*eps_l vanished; the pseudo-spinor basis is not invertible.
    #[error("singular preparation: 1 - eps_s_tilde * eps_l_tilde is numerically zero")]
    SingularPreparation,

    /// Operation requested outside the regime in which the model defines it.
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    /// A sampling grid cannot support the requested evaluation.
    #[error("grid error: {0}")]
    Grid(String),

    /// Two curves that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The fixed-step integrator lost unitarity.
    #[error("integrator failure: {0}")]
    Integrator(String),

    /// No decay channel exists at the requested energy.
    #[error("empty sector: no channel at omega = {omega}")]
    EmptySector { omega: f64 },

    /// A quadrature window is too small for the requested accuracy.
    #[error("quadrature window too small: {0}")]
    WindowTooSmall(String),

    /// Not enough data to run a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    /// A study stage failed; names the stage and carries the cause.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors caused by bad user input (CLI exit code 1);
    /// false for failures encountered mid-computation (exit code 2).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::MissingKey(_)
            | Error::InvalidValue { .. }
            | Error::Validation(_)
            | Error::Config(_)
            | Error::NegativeTime(_)
            | Error::UnsupportedRegime(_)
            | Error::InsufficientData(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    /// Wraps an error with the study stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}
