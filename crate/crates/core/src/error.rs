use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A time value lies outside the time scale, or outside the domain of the
    /// requested operation (e.g. the delta-derivative at a removed maximum).
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// `I + mu*K` is singular (or numerically so) at the reported point.
    #[error("regressivity failure at t = {t}: |det(I + mu K)| = {det_abs:.3e} below threshold")]
    NonRegressive { t: f64, det_abs: f64 },

    /// A matrix that must be inverted is singular.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// The sampled family does not commute; the closed-form exponential does
    /// not apply. Use `exp_ode` instead.
    #[error(
        "non-commuting coefficient family (worst residual {residual:.3e} at t = {t1}, {t2}); \
         use exp_ode, which handles the non-commuting case"
    )]
    NonCommuting { t1: f64, t2: f64, residual: f64 },

    /// An implicit step failed to converge.
    #[error("implicit step at t = {t} did not converge in {iters} iterations (residual {residual:.3e})")]
    NoConvergence { t: f64, iters: usize, residual: f64 },

    /// A field evaluation left its declared domain (division by zero, sqrt of
    /// a negative, non-finite result).
    #[error("field evaluation failed at t = {t}: {reason}")]
    FieldEval { t: f64, reason: String },

    /// Expression parse error with a character offset into the source.
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// Configuration file rejected.
    #[error("config error: {0}")]
    Config(String),

    /// Unknown theorem tag, builtin name, or similar usage mistake.
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
