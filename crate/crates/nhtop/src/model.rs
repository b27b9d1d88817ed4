//! Model construction: reduced parameters, band coefficients, and dense
//! Hamiltonians of a single-band dissipative cavity chain.
//!
//! A chain of `N` cavities with coherent hoppings `J_l` (range `l = 1..=L`),
//! dissipative couplings `Gamma_l` mediated by engineered reservoirs with
//! phases `theta_l`, local waveguide decay `gamma`, incoherent pump `kappa`
//! and a coherent drive at detuning `delta` evolves, at mean-field level, as
//! a linear system generated by a banded Toeplitz matrix.  Everything in this
//! crate is derived from the `2L + 1` complex band coefficients `mu_l`; this
//! module constructs them and materializes the finite matrices.
//!
//! Units: internal computation sets the effective on-site decay rate
//! `gamma_eff = 1`, which pins the on-site coefficient to `mu_0 = -delta - i`.
//! The stored `gamma_eff` only restores physical units at the presentation
//! layer.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::C64;

/// Reduced (dimensionless) parameters of the cavity array.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeParams {
    /// Reduced coherent hoppings `Lambda_l = 2 J_l / gamma_eff`, one entry
    /// per neighbor shell `l = 1..=L`.  Complex values are accepted; the
    /// raw-rate constructor only ever produces real ones.
    pub lambda: Vec<C64>,
    /// Reduced dissipative couplings `C_l = Gamma_l / gamma_eff`, all `>= 0`.
    pub cooperativity: Vec<f64>,
    /// Gauge-invariant fluxes `theta_l` in radians.
    pub theta: Vec<f64>,
    /// Drive-cavity detuning `delta = (omega_d - omega_c) / gamma_eff`.
    pub delta: f64,
    /// Effective on-site decay rate in physical units (`> 0`); kept only to
    /// restore dimensions on output.
    pub gamma_eff: f64,
}

impl LatticeParams {
    /// Validated constructor.  Requires at least one neighbor shell, equal
    /// list lengths, non-negative cooperativities and a positive decay rate.
    pub fn new(
        lambda: Vec<C64>,
        cooperativity: Vec<f64>,
        theta: Vec<f64>,
        delta: f64,
        gamma_eff: f64,
    ) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::InvalidParams(
                "lambda must contain at least one neighbor shell (L >= 1)".into(),
            ));
        }
        if cooperativity.len() != lambda.len() || theta.len() != lambda.len() {
            return Err(Error::InvalidParams(format!(
                "lambda, cooperativity and theta must have equal length (got {}, {}, {})",
                lambda.len(),
                cooperativity.len(),
                theta.len()
            )));
        }
        if let Some(c) = cooperativity.iter().find(|c| !(**c >= 0.0)) {
            return Err(Error::InvalidParams(format!(
                "cooperativity entries must be non-negative, got {c}"
            )));
        }
        if !(gamma_eff > 0.0) {
            return Err(Error::NonPositiveGammaEff(gamma_eff));
        }
        if !delta.is_finite() || theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        Ok(LatticeParams {
            lambda,
            cooperativity,
            theta,
            delta,
            gamma_eff,
        })
    }

    /// Convenience constructor for the ubiquitous nearest-neighbor model
    /// with a real hopping.
    pub fn nearest_neighbor(lambda: f64, cooperativity: f64, theta: f64, delta: f64) -> Self {
        LatticeParams::new(
            vec![C64::new(lambda, 0.0)],
            vec![cooperativity],
            vec![theta],
            delta,
            1.0,
        )
        .expect("nearest-neighbor parameters are structurally valid")
    }

    /// Coupling range `L` (number of neighbor shells).
    pub fn range(&self) -> usize {
        self.lambda.len()
    }
}

/// Physical rates of the array before reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRates {
    /// Coherent hopping amplitudes `J_l` (rate units).
    pub j: Vec<f64>,
    /// Engineered-reservoir decay rates `Gamma_l >= 0`.
    pub gamma_l: Vec<f64>,
    /// Reservoir fluxes `theta_l` (radians).
    pub theta: Vec<f64>,
    /// Local waveguide decay rate `gamma >= 0`.
    pub gamma: f64,
    /// Local incoherent pump rate `kappa >= 0`.
    pub kappa: f64,
    /// Cavity resonance frequency.
    pub omega_c: f64,
    /// Drive frequency.
    pub omega_d: f64,
}

/// Reduce physical rates to dimensionless parameters.
///
/// The effective on-site decay is `gamma_eff = (gamma - kappa
/// + 2 * sum_l Gamma_l) / 2`; it must come out strictly positive, otherwise
/// local gain beats loss and the reduced parametrization is undefined.
pub fn reduce(raw: &RawRates) -> Result<LatticeParams> {
    if raw.j.is_empty() {
        return Err(Error::InvalidParams(
            "at least one neighbor shell required (L >= 1)".into(),
        ));
    }
    if raw.gamma_l.len() != raw.j.len() || raw.theta.len() != raw.j.len() {
        return Err(Error::InvalidParams(format!(
            "J, Gamma and theta must have equal length (got {}, {}, {})",
            raw.j.len(),
            raw.gamma_l.len(),
            raw.theta.len()
        )));
    }
    if let Some(g) = raw.gamma_l.iter().find(|g| !(**g >= 0.0)) {
        return Err(Error::InvalidParams(format!(
            "Gamma entries must be non-negative, got {g}"
        )));
    }
    if !(raw.gamma >= 0.0) || !(raw.kappa >= 0.0) {
        return Err(Error::InvalidParams(
            "gamma and kappa must be non-negative".into(),
        ));
    }
    let gamma_eff = (raw.gamma - raw.kappa + 2.0 * raw.gamma_l.iter().sum::<f64>()) / 2.0;
    if !(gamma_eff > 0.0) {
        return Err(Error::NonPositiveGammaEff(gamma_eff));
    }
    LatticeParams::new(
        raw.j.iter().map(|j| C64::new(2.0 * j / gamma_eff, 0.0)).collect(),
        raw.gamma_l.iter().map(|g| g / gamma_eff).collect(),
        raw.theta.clone(),
        (raw.omega_d - raw.omega_c) / gamma_eff,
        gamma_eff,
    )
}

/// The `2L + 1` band coefficients `mu_l`, `l = -L..=L`, of the Toeplitz
/// matrix, in units of `gamma_eff`.  Single source of truth for the open,
/// periodic and Bloch forms.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzCoefficients {
    /// Stored in band order: `mu[idx]` holds `mu_(idx - L)`.
    mu: Vec<C64>,
}

impl ToeplitzCoefficients {
    /// Build from the bands listed in order `mu_{-L}, ..., mu_0, ..., mu_{+L}`.
    /// The list length must be odd and at least 3 (range `L >= 1`).
    pub fn from_bands(mu: Vec<C64>) -> Result<Self> {
        if mu.len() < 3 || mu.len() % 2 == 0 {
            return Err(Error::InvalidParams(format!(
                "band list must have odd length 2L+1 with L >= 1, got {}",
                mu.len()
            )));
        }
        if mu.iter().any(|m| !m.re.is_finite() || !m.im.is_finite()) {
            return Err(Error::InvalidParams("band coefficients must be finite".into()));
        }
        Ok(ToeplitzCoefficients { mu })
    }

    /// Coupling range `L`.
    pub fn range(&self) -> usize {
        (self.mu.len() - 1) / 2
    }

    /// Band coefficient `mu_l`; zero outside the stored range.
    pub fn mu(&self, l: i64) -> C64 {
        let ll = self.range() as i64;
        if l < -ll || l > ll {
            C64::new(0.0, 0.0)
        } else {
            self.mu[(l + ll) as usize]
        }
    }

    /// All bands in order `mu_{-L} ..= mu_{+L}`.
    pub fn bands(&self) -> &[C64] {
        &self.mu
    }

    /// Coefficients of the adjoint matrix: `mu_l -> conj(mu_{-l})`.
    pub fn adjoint(&self) -> Self {
        // reversing maps index l to -l; conjugation completes the adjoint
        let mu: Vec<C64> = self.mu.iter().rev().map(|m| m.conj()).collect();
        ToeplitzCoefficients { mu }
    }

    /// True when the generated matrix would be Hermitian
    /// (`mu_{-l} = conj(mu_l)` for every band).
    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        let scale = self.mu.iter().map(|m| m.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return true;
        }
        let ll = self.range() as i64;
        (0..=ll).all(|l| (self.mu(-l) - self.mu(l).conj()).norm() <= rel_tol * scale)
    }
}

/// Band coefficients generated by reduced parameters:
/// `mu_0 = -delta - i` and, for each shell `l = 1..=L`,
/// `mu_{+l} = (Lambda_l - i C_l e^{-i theta_l}) / 2`,
/// `mu_{-l} = (conj(Lambda_l) - i C_l e^{+i theta_l}) / 2`.
///
/// For real `Lambda_l` the two formulas are the usual `∓theta` pair; for
/// complex `Lambda_l` the conjugate on the lower band keeps the coherent part
/// of the matrix Hermitian (a hopping `Lambda_l` from site m to m+l is
/// accompanied by `conj(Lambda_l)` back), which is what a hopping term in the
/// underlying array produces.
pub fn coefficients(p: &LatticeParams) -> ToeplitzCoefficients {
    let l = p.range();
    let mut mu = vec![C64::new(0.0, 0.0); 2 * l + 1];
    mu[l] = C64::new(-p.delta, -1.0);
    for shell in 1..=l {
        let lam = p.lambda[shell - 1];
        let c = p.cooperativity[shell - 1];
        let th = p.theta[shell - 1];
        let i = C64::new(0.0, 1.0);
        let phase_minus = C64::from_polar(1.0, -th);
        let phase_plus = C64::from_polar(1.0, th);
        mu[l + shell] = (lam - i * c * phase_minus) / 2.0;
        mu[l - shell] = (lam.conj() - i * c * phase_plus) / 2.0;
    }
    ToeplitzCoefficients { mu }
}

/// The Bloch symbol `H(k) = sum_l mu_l e^{i k l}`, periodic in `k` with
/// period `2*pi`.
pub fn bloch(c: &ToeplitzCoefficients, k: f64) -> C64 {
    let ll = c.range() as i64;
    let mut h = C64::new(0.0, 0.0);
    for l in -ll..=ll {
        h += c.mu(l) * C64::from_polar(1.0, k * l as f64);
    }
    h
}

/// Which boundary condition a finite matrix was built with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

/// A finite lattice Hamiltonian: dense matrix plus the provenance needed by
/// downstream numerics (band coefficients for graded similarity transforms,
/// boundary kind, and whether a site-dependent diagonal was added).
#[derive(Debug, Clone)]
pub struct ObcHamiltonian {
    /// Number of sites.
    pub n: usize,
    /// Dense `n x n` matrix, row index = site the amplitude lands on.
    pub matrix: Array2<C64>,
    /// Band coefficients of the translation-invariant part, if the matrix
    /// was built from them.  Diagonal disorder keeps this: it never touches
    /// the off-diagonal bands.
    pub coeffs: Option<ToeplitzCoefficients>,
    /// Boundary condition used at construction.
    pub boundary: Boundary,
    /// True when a site-dependent diagonal term has been added.
    pub disordered: bool,
}

impl ObcHamiltonian {
    /// Wrap an arbitrary square matrix (no band provenance).
    pub fn from_matrix(matrix: Array2<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidParams(format!(
                "expected a nonempty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(ObcHamiltonian {
            n: matrix.nrows(),
            matrix,
            coeffs: None,
            boundary: Boundary::Open,
            disordered: false,
        })
    }

    /// Adjoint Hamiltonian (conjugate transpose), with provenance mapped
    /// through.
    pub fn adjoint(&self) -> Self {
        let mut m = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for j in 0..self.n {
                m[[i, j]] = self.matrix[[j, i]].conj();
            }
        }
        ObcHamiltonian {
            n: self.n,
            matrix: m,
            coeffs: self.coeffs.as_ref().map(|c| c.adjoint()),
            boundary: self.boundary,
            disordered: self.disordered,
        }
    }
}

/// Dense Toeplitz matrix under open boundaries: `H[m][n] = mu_(n - m)` for
/// `|n - m| <= L`, zero beyond the band.  `mu_{+1}` therefore occupies the
/// super-diagonal: it moves amplitude from site m+1 to site m.
pub fn build_obc(c: &ToeplitzCoefficients, n: usize) -> Result<ObcHamiltonian> {
    let l = c.range();
    if n < l + 1 {
        return Err(Error::SizeTooSmall { n, l, need: l + 1 });
    }
    let mut m = Array2::zeros((n, n));
    for row in 0..n {
        for band in -(l as i64)..=(l as i64) {
            let col = row as i64 + band;
            if col >= 0 && col < n as i64 {
                m[[row, col as usize]] = c.mu(band);
            }
        }
    }
    Ok(ObcHamiltonian {
        n,
        matrix: m,
        coeffs: Some(c.clone()),
        boundary: Boundary::Open,
        disordered: false,
    })
}

/// Circulant completion of the Toeplitz matrix (periodic boundaries):
/// `H[m][(m + l) mod N] = mu_l`.  Its eigenvalues are exactly the Bloch
/// values `H(2*pi*m/N)`.  Requires `N >= 2L + 1` so wrapped bands cannot
/// collide with direct ones.
pub fn build_pbc(c: &ToeplitzCoefficients, n: usize) -> Result<ObcHamiltonian> {
    let l = c.range();
    if n < 2 * l + 1 {
        return Err(Error::SizeTooSmall { n, l, need: 2 * l + 1 });
    }
    let mut m = Array2::zeros((n, n));
    for row in 0..n {
        for band in -(l as i64)..=(l as i64) {
            let col = (row as i64 + band).rem_euclid(n as i64) as usize;
            m[[row, col]] = c.mu(band);
        }
    }
    Ok(ObcHamiltonian {
        n,
        matrix: m,
        coeffs: Some(c.clone()),
        boundary: Boundary::Periodic,
        disordered: false,
    })
}
