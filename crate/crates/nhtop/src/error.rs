//! Error type shared by every module in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Effective decay rate came out nonpositive during parameter reduction.
    #[error("effective rate (gamma - kappa + 2*sum Gamma_l)/2 = {0} is not positive")]
    NonPositiveGammaEff(f64),

    /// Requested lattice too small for the hopping range.
    #[error("lattice size {n} too small for range {l} ({need} sites needed)")]
    SizeTooSmall { n: usize, l: usize, need: usize },

    /// Inconsistent or out-of-range model parameters.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The Bloch curve passes through the origin; the winding number is
    /// undefined there and the system sits at a topological transition.
    #[error("spectrum passes through the origin (min sigma/max sigma = {0:.3e}); winding undefined")]
    OriginOnCurve(f64),

    /// Accumulated winding failed the integrality check, typically a grid
    /// too coarse to track the phase.
    #[error("winding {0} is not an integer within residual {1:.3e}; refine the momentum grid")]
    NonIntegerWinding(f64, f64),

    /// Operation requires an open point gap but the spectrum is degenerate.
    #[error("complex spectrum is degenerate (encloses no area); no point gap")]
    DegenerateSpectrum,

    /// Singular values fall inside the half-gap dead band, so the zero-mode
    /// count is not trustworthy.
    #[error("{count} singular value(s) inside [Delta/2, Delta) = [{half:.3e}, {gap:.3e}); zero-mode separation ambiguous")]
    AmbiguousSeparation { count: usize, half: f64, gap: f64 },

    /// Closed-form zero mode requested away from the exceptional point.
    #[error("not at an exceptional point: both mu_{{+1}} and mu_{{-1}} are significant (|ratio| = {0:.3e})")]
    NotAtExceptionalPoint(f64),

    /// |eta| = 1: the closed-form normalization degenerates.
    #[error("|eta| = {0} is unit within tolerance; closed-form zero mode undefined")]
    EtaUnit(f64),

    /// Probe frequency sits on the singular spectrum; response diverges.
    #[error("omega = {omega} is singular within tolerance (min sigma = {min_sigma:.3e})")]
    SingularAtProbe { omega: f64, min_sigma: f64 },

    /// Backend factorization did not converge.
    #[error("linear algebra backend failed: {0}")]
    NumericalFailure(String),
}
