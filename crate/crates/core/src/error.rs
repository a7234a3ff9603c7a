//! Crate-wide error type.
//!
//! Every failure mode that callers are expected to branch on gets its own
//! variant; the CLI maps variants onto process exit codes.

use thiserror::Error;

/// Errors produced by the heavytail library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside its documented domain (non-finite input,
    /// probability outside [0,1), ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Distribution parameters violate the family's admissibility constraints.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A mean-based quantity was requested for a model with tail index
    /// alpha <= 1, where the mean does not exist.
    #[error("infinite mean: tail index alpha = {alpha} <= 1")]
    InfiniteMean { alpha: f64 },

    /// Not enough observations for the requested estimator.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The exceedance set is degenerate (e.g. all excesses equal), so the
    /// likelihood is maximized on a parameter-space boundary.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Root bracketing failed: no sign change over the supplied interval.
    #[error("no sign change of f over [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    /// Adaptive quadrature hit its subdivision limit before reaching the
    /// requested tolerance. Carries the best estimate obtained.
    #[error("quadrature did not converge: best estimate {best} (error estimate {error_estimate})")]
    QuadratureConvergence {
        best: f64,
        error_estimate: f64,
        evaluations: usize,
    },

    /// Derivative-free minimization failed.
    #[error("optimization failed: {0}")]
    Optimization(String),

    /// A maximum-likelihood fit failed (all starts diverged, boundary
    /// solution, ...). Carries diagnostics.
    #[error("fit failed: {0}")]
    Fit(String),

    /// The requested probability level lies outside the fitted tail
    /// (p >= q_u); the parametric model cannot serve it.
    #[error("extrapolation domain: {0}")]
    ExtrapolationDomain(String),

    /// The requested return-period event sits below the fitted threshold.
    #[error("sub-threshold event: {0}")]
    SubThreshold(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A row of an input file failed to parse or violated validity rules.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    /// Loading produced no usable rows.
    #[error("empty result: {0}")]
    Empty(String),

    /// CLI configuration error (bad flags, mutually exclusive options, ...).
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
