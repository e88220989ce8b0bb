//! Error type shared by every numerical module of the crate.

use thiserror::Error;

/// Failures reported by the fluxon library.
///
/// Every variant carries enough context to diagnose the failing evaluation
/// without re-running it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluxonError {
    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A user-supplied impulse profile violates a structural requirement.
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    /// An argument lies outside the domain of the function being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature, root-finder or iteration failed to reach its tolerance.
    #[error("numerical failure in {context}: {detail}")]
    Numeric {
        /// Operation that failed.
        context: String,
        /// Diagnostic information (residuals, iteration counts, ...).
        detail: String,
    },

    /// Two poles of the spectrum coincide or an eigenvalue hits `v = 2`.
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    /// The dense residue system is too ill-conditioned to trust.
    #[error(
        "residue system condition estimate {cond:.3e} exceeds cap {cap:.3e}; \
         use a smaller N or the mirrored Delta policy"
    )]
    Conditioning {
        /// One-norm condition estimate of the assembled matrix.
        cond: f64,
        /// Configured cap.
        cap: f64,
    },

    /// The requested point is too close to the separatrix `|x| = x_crit`.
    #[error("|x| = {x} lies within {delta} of the separatrix x_crit = {x_crit}")]
    SeparatrixExclusion {
        /// Requested abscissa.
        x: f64,
        /// Critical abscissa of the profile.
        x_crit: f64,
        /// Exclusion half-width.
        delta: f64,
    },

    /// A bracketing root-finder found no sign change.
    #[error("no sign change for root bracket: {0}")]
    RootBracket(String),

    /// Newton continuation failed; the last accepted time is reported.
    #[error("continuation failed at t = {t_failed} (last good t = {t_last_good}): {detail}")]
    Continuation {
        /// Time at which convergence was lost.
        t_failed: f64,
        /// Time of the last accepted state.
        t_last_good: f64,
        /// Diagnostic detail.
        detail: String,
    },

    /// The near-origin chart was asked for a point on an excluded curve.
    #[error("point lies on an excluded curve t = t_pm(x): {0}")]
    ExcludedCurve(String),

    /// A state of one modulation case was passed to an operation of the other.
    #[error("case mismatch: {0}")]
    CaseMismatch(String),

    /// A state violates one of its defining invariants.
    #[error("state invariant violated: {0}")]
    StateInvariant(String),

    /// Contour geometry could not be constructed.
    #[error("contour geometry error: {0}")]
    Geometry(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, FluxonError>;

pub(crate) fn numeric(context: &str, detail: impl Into<String>) -> FluxonError {
    FluxonError::Numeric {
        context: context.to_string(),
        detail: detail.into(),
    }
}
