use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("config parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("wavenumber must be positive, got {0}")]
    NonPositiveWavenumber(f64),

    #[error("feature {feature} not found for d in (0, {d_max}]")]
    FeatureNotFound { feature: &'static str, d_max: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("tau = {tau} is outside [0, {tau_max}) (aliasing threshold)")]
    Aliasing { tau: f64, tau_max: f64 },

    #[error("maximizer did not converge; best iterate k = {best_k}")]
    NoConvergence { best_k: f64 },

    #[error("quadrature did not converge: last estimates {previous} and {last}")]
    QuadratureNoConvergence { previous: String, last: String },

    #[error("need at least {needed} samples for a fit, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("branch {0} has vanishing norm")]
    EmptyBranch(&'static str),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
