//! The Hermitian double of a non-Hermitian chain: a generalized
//! two-sublattice chain whose spectrum is the symmetrized singular spectrum
//! `{+sigma_j} U {-sigma_j}` of the original matrix.
//!
//! Placing `H` and `H^dag` in the off-diagonal blocks of a `2N x 2N`
//! Hermitian matrix maps singular values to eigenvalue pairs `+-sigma` and
//! singular vectors to sublattice components of eigenvectors.  Zero singular
//! modes become mid-gap states, and the winding of `H(k)` reappears as the
//! quantized Berry (Zak) phase `pi nu` of each Bloch band of the double —
//! the standard topological toolbox for chiral-symmetric chains applies
//! verbatim.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use serde::Serialize;
use std::f64::consts::{PI, TAU};

use crate::bloch::BlochSamples;
use crate::error::{Error, Result};
use crate::model::ObcHamiltonian;
use crate::tol::Tolerances;
use crate::C64;

/// Largest tolerated single-step phase advance of `H(k)` between adjacent
/// grid points; beyond this the half-angle relation behind the quantized
/// Berry phase can alias (same guard as the winding computation).
const MAX_STEP_FRACTION: f64 = 0.9;

/// Tolerated deviation of the accumulated Berry phase from an integer
/// multiple of `pi`.
const QUANTIZATION_RESIDUAL: f64 = 1e-6;

/// Hermitian `2N x 2N` double of an `N`-site chain, sublattice-ordered: the
/// first `N` indices are the A sites, the last `N` the B sites.
#[derive(Debug, Clone)]
pub struct GsshObc {
    /// Sites per sublattice.
    pub n: usize,
    /// The doubled matrix `[[0, H^dag], [H, 0]]` (A block first).
    pub matrix: Array2<C64>,
}

/// Eigendecomposition of the double: real ascending eigenvalues with
/// orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct GsshEig {
    /// Eigenvalues, ascending; symmetric about zero.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, aligned with `values`.
    pub vectors: Array2<C64>,
}

/// Build the Hermitian double `[[0, H^dag], [H, 0]]`.
///
/// The zero diagonal blocks make the sublattice parity `diag(1_N, -1_N)`
/// anticommute with the result exactly, for any `H` — disordered chains
/// included — so the spectrum is symmetric about zero by construction.
pub fn double(h: &ObcHamiltonian) -> GsshObc {
    let n = h.n;
    let mut m = Array2::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            m[[i, n + j]] = h.matrix[[j, i]].conj(); // H^dag in the top-right
            m[[n + i, j]] = h.matrix[[i, j]]; // H in the bottom-left
        }
    }
    GsshObc { n, matrix: m }
}

impl GsshObc {
    /// Hermitian eigendecomposition, eigenvalues ascending.
    pub fn eigendecomposition(&self) -> Result<GsshEig> {
        let (vals, vecs) = self
            .matrix
            .eigh(UPLO::Lower)
            .map_err(|e| Error::NumericalFailure(format!("hermitian eig: {e}")))?;
        let values = vals.to_vec();
        // Row-major storage reaches the column-major backend as the
        // transpose, i.e. the conjugate of a Hermitian matrix, so the
        // returned columns may solve the conjugated problem instead.  Pick
        // the orientation with the smaller residual rather than hard-coding
        // a layout assumption.
        let conjugated = vecs.mapv(|z| z.conj());
        let vectors = if eig_residual(&self.matrix, &conjugated, &values)
            < eig_residual(&self.matrix, &vecs, &values)
        {
            conjugated
        } else {
            vecs
        };
        Ok(GsshEig { values, vectors })
    }
}

/// Frobenius norm of `M X - X diag(vals)`.
fn eig_residual(m: &Array2<C64>, x: &Array2<C64>, vals: &[f64]) -> f64 {
    let mx = m.dot(x);
    let mut r = 0.0;
    for j in 0..vals.len() {
        for i in 0..vals.len() {
            r += (mx[[i, j]] - vals[j] * x[[i, j]]).norm_sqr();
        }
    }
    r.sqrt()
}

/// The two Bloch bands `±|H(k)|` of the double on a momentum grid.
#[derive(Debug, Clone, Serialize)]
pub struct GsshBands {
    /// Grid momenta in `[0, 2*pi)`.
    pub k: Vec<f64>,
    /// Lower band `-|H(k)|`.
    pub e_minus: Vec<f64>,
    /// Upper band `+|H(k)|`.
    pub e_plus: Vec<f64>,
}

/// Sample the doubled Bloch bands from an existing band sampling.
pub fn gssh_bands(s: &BlochSamples) -> GsshBands {
    GsshBands {
        k: s.k.clone(),
        e_minus: s.sigma.iter().map(|&v| -v).collect(),
        e_plus: s.sigma.clone(),
    }
}

/// Quantized Zak invariant of the doubled Bloch Hamiltonian
/// `[[0, conj(H(k))], [H(k), 0]]`.
///
/// Each band's eigenvectors `psi_(+-)(k) = (+- conj(H)/|H|, 1) / sqrt(2)`
/// accumulate a Berry phase around the Brillouin zone that is exactly `pi`
/// times the winding number of `H(k)` — evaluated here as a Wilson loop of
/// discrete overlaps, summed as a real lift rather than reduced mod `2*pi`,
/// independently for both bands.
///
/// Fails with [`Error::OriginOnCurve`] when the band touches zero (the
/// double's gap closes, the spinors degenerate) and with
/// [`Error::NonIntegerWinding`] when the grid is too coarse for the
/// half-angle relation or the accumulated phase misses quantization.
pub fn zak_invariant(s: &BlochSamples, tol: &Tolerances) -> Result<i64> {
    let max = s.max_sigma();
    let min = s.min_sigma();
    if max == 0.0 || min <= tol.eps_zero * max {
        return Err(Error::OriginOnCurve(if max == 0.0 { 0.0 } else { min / max }));
    }
    let gamma_plus = band_berry_phase(&s.h, 1.0)?;
    let gamma_minus = band_berry_phase(&s.h, -1.0)?;
    let average = (gamma_plus + gamma_minus) / 2.0;
    let ratio = average / PI;
    let nearest = ratio.round();
    let residual = (ratio - nearest).abs();
    if residual > QUANTIZATION_RESIDUAL || (gamma_plus - gamma_minus).abs() > QUANTIZATION_RESIDUAL
    {
        return Err(Error::NonIntegerWinding(ratio, residual));
    }
    Ok(nearest as i64)
}

/// Berry phase of one band of the doubled Bloch Hamiltonian as a discrete
/// Wilson loop: `gamma = -sum_j arg <psi(k_j) | psi(k_(j+1))>`, accumulated
/// term by term so the result is a real number, not a residue mod `2*pi`.
fn band_berry_phase(h: &[C64], band_sign: f64) -> Result<f64> {
    let n = h.len();
    let mut gamma = 0.0;
    for j in 0..n {
        let a = h[j];
        let b = h[(j + 1) % n];
        // spinor components s e^{-i phi} with s = +-1; the overlap of unit
        // spinors at adjacent momenta
        let ua = band_sign * a.conj() / a.norm();
        let ub = band_sign * b.conj() / b.norm();
        let overlap = (ua.conj() * ub + 1.0) / 2.0;
        // the half-angle form is faithful only while the phase step stays
        // well inside (-pi, pi); reject aliasing-prone grids
        let step = (b * a.conj()).arg().abs();
        if step > MAX_STEP_FRACTION * PI {
            return Err(Error::NonIntegerWinding(f64::NAN, step / PI));
        }
        gamma -= overlap.arg();
    }
    Ok(gamma)
}

/// Convenience: the invariant from band coefficients on a fresh grid.
pub fn zak_invariant_of(
    c: &crate::model::ToeplitzCoefficients,
    n_k: usize,
    tol: &Tolerances,
) -> Result<i64> {
    let s = crate::bloch::sample(c, n_k, tol);
    zak_invariant(&s, tol)
}

/// Quasi-momentum grid helper for band plots: `n_k` points on `[0, 2*pi)`.
pub fn momentum_grid(n_k: usize) -> Vec<f64> {
    (0..n_k).map(|j| TAU * j as f64 / n_k as f64).collect()
}
