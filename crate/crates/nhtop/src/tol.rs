//! Numerical tolerances used by the classification routines.
//!
//! All thresholds are relative to the natural scale of the quantity they
//! guard (largest singular value, squared curve scale, ...), so the defaults
//! survive a global rescaling of the coefficients.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative threshold below which a magnitude counts as zero
    /// (origin-on-curve detection, exceptional-point tests, probe
    /// singularity).
    pub eps_zero: f64,
    /// Relative threshold on |enclosed area| / (max sigma)^2 separating a
    /// degenerate (line-like) spectrum from an open point gap.
    pub eps_area: f64,
    /// Relative residual below which the banded normality conditions and the
    /// commutator cross-check count as satisfied.
    pub eps_norm: f64,
    /// Relative residual below which a mirror symmetry of the Bloch curve
    /// counts as exact (reciprocity test).
    pub eps_rec: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_zero: 1e-9,
            eps_area: 1e-8,
            eps_norm: 1e-9,
            eps_rec: 1e-8,
        }
    }
}
