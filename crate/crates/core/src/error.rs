use thiserror::Error;

/// Error taxonomy shared by every module.
///
/// The CLI maps each variant onto a distinct process exit code, so keep the
/// grouping stable: parameter/validation problems, solver divergence,
/// violated analytic hypotheses, and representation (degree/cutoff) failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: String, reason: String },

    #[error("state outside admissible domain: {0}")]
    Domain(String),

    #[error("fixed-point iteration diverged after {iters} steps (residual {residual:.3e}, tol {tol:.3e})")]
    Divergence {
        iters: usize,
        residual: f64,
        tol: f64,
    },

    #[error("hypothesis `{name}` violated: {detail}")]
    Hypothesis { name: String, detail: String },

    #[error("nonresonance violated: |1-e^(ik.w)| = {value:.3e} < alpha = {alpha:.3e} at k = {k:?}")]
    Nonresonance { value: f64, alpha: f64, k: Vec<i64> },

    #[error("representation error: {0}")]
    Representation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parameter(name: &str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub fn hypothesis(name: &str, detail: impl Into<String>) -> Self {
        Error::Hypothesis {
            name: name.to_string(),
            detail: detail.into(),
        }
    }
}
