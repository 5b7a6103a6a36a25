//! Error taxonomy shared by every solver layer.
//!
//! The variants map one-to-one onto the failure classes the numerical
//! routines can hit: bad scalar inputs, mode-index misuse, dimension
//! mismatches, invalid configuration, delay lookups outside the stored
//! window, trajectory blow-up, fixed-point stalls, refused certificates,
//! and measured violations of a proved bound.

use crate::periodic::ConvergenceReport;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A scalar argument left its mathematical domain (for example a
    /// non-positive diffusion coefficient or a negative time).
    #[error("domain error: {0}")]
    Domain(String),

    /// A 1-based mode index fell outside `1..=n_modes`.
    #[error("mode index {index} out of range 1..={n_modes}")]
    ModeIndex { index: usize, n_modes: usize },

    /// Two spectral objects with incompatible mode counts were combined.
    #[error("shape mismatch: expected {expected} modes, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    /// A structural parameter (grid sizes, tolerances, table layout) is
    /// unusable before any numerics run.
    #[error("configuration error: {0}")]
    Config(String),

    /// A delayed lookup asked for a time the stored history no longer
    /// (or does not yet) cover.
    #[error(
        "history underrun: requested t = {requested}, window is [{window_start}, {window_end}]"
    )]
    HistoryUnderrun {
        requested: f64,
        window_start: f64,
        window_end: f64,
    },

    /// A trajectory coefficient exceeded the divergence guard or became
    /// non-finite while stepping.
    #[error("solution diverged at t = {t}: max |coefficient| = {max_abs_coeff:e}")]
    Divergence { t: f64, max_abs_coeff: f64 },

    /// The fixed-point iteration exhausted its iteration budget. The
    /// partial convergence report is preserved for diagnosis.
    #[error(
        "no convergence after {} iterations (last residual {:e})",
        report.iterations,
        report.residuals.last().copied().unwrap_or(f64::NAN)
    )]
    ConvergenceFailure { report: Box<ConvergenceReport> },

    /// Certificate mode was requested but the hypothesis data needed to
    /// back the certificate is absent or violated.
    #[error("certificate refused: {0}")]
    CertificateRefused(String),

    /// A quantity that a proved estimate says must dominate was measured
    /// to be exceeded; points at an implementation bug or inconsistent
    /// hypothesis data.
    #[error("bound violated at t = {t}: measured {measured:e} > bound {bound:e}")]
    BoundViolation { t: f64, measured: f64, bound: f64 },
}

impl Error {
    /// Helper for domain errors built from format strings.
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Helper for configuration errors built from format strings.
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
