//! Analysis of the periodic-boundary complex band `H(k)`: sampling,
//! point-gap classification, the origin-referenced winding number, the gap
//! `Delta = min_k |H(k)|`, and the normality / reciprocity diagnostics.
//!
//! The complex band is a closed curve in the complex plane.  Curves with no
//! interior (line segments, retraced arcs) are *degenerate*; curves with
//! interior have an open *point gap* and carry an integer winding number
//! about the origin.  A nonzero winding is the topological invariant behind
//! directional amplification; an open point gap already implies the matrix
//! is non-normal and the transport non-reciprocal.

use serde::Serialize;
use std::f64::consts::{PI, TAU};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{self, build_obc, ToeplitzCoefficients};
use crate::tol::Tolerances;
use crate::C64;

/// A uniformly sampled Bloch band.
#[derive(Debug, Clone)]
pub struct BlochSamples {
    /// Momentum grid, `k[j] = 2*pi*j / n_k`, `j = 0..n_k`.
    pub k: Vec<f64>,
    /// Band values `H(k[j])`.
    pub h: Vec<C64>,
    /// Moduli `sigma(k[j]) = |H(k[j])|`.
    pub sigma: Vec<f64>,
    /// Phases `phi(k[j]) = Arg H(k[j])`, unwrapped by nearest-branch
    /// continuation starting from the principal value at `k = 0`.
    pub phi: Vec<f64>,
    /// False where `sigma` is so small (relative to its maximum) that the
    /// stored phase is numerically meaningless.
    pub phase_reliable: Vec<bool>,
    coeffs: ToeplitzCoefficients,
}

impl BlochSamples {
    /// Number of grid points.
    pub fn n_k(&self) -> usize {
        self.k.len()
    }

    /// The coefficients the band was sampled from (used for off-grid
    /// refinement).
    pub fn coefficients(&self) -> &ToeplitzCoefficients {
        &self.coeffs
    }

    /// Largest sampled modulus.
    pub fn max_sigma(&self) -> f64 {
        self.sigma.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest sampled modulus.
    pub fn min_sigma(&self) -> f64 {
        self.sigma.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Grid size used for band-resolved comparisons against an `N`-site open
/// chain: fine enough that every open-boundary singular value has a nearby
/// grid momentum.
pub fn default_n_k(n_sites: usize) -> usize {
    1024usize.max(32 * n_sites)
}

/// Sample the band on a uniform grid.
///
/// The requested grid is clamped up to `max(64, 8*(2L+1))` points and made
/// even, so phase steps stay resolvable and the reciprocity scan can use
/// half-grid symmetry centers.
pub fn sample(c: &ToeplitzCoefficients, n_k: usize, tol: &Tolerances) -> BlochSamples {
    let min_grid = 64usize.max(8 * (2 * c.range() + 1));
    let mut n = n_k.max(min_grid);
    n += n & 1;
    let k: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
    let h: Vec<C64> = k.iter().map(|&kj| model::bloch(c, kj)).collect();
    let sigma: Vec<f64> = h.iter().map(|z| z.norm()).collect();
    let max_sigma = sigma.iter().copied().fold(0.0, f64::max);
    let floor = tol.eps_zero * max_sigma;
    let phase_reliable: Vec<bool> = sigma.iter().map(|&s| s > floor).collect();
    // nearest-branch unwrap
    let mut phi = Vec::with_capacity(n);
    let mut prev = h[0].arg();
    phi.push(prev);
    for j in 1..n {
        let step = principal_arg_ratio(h[j], h[j - 1]);
        prev += step;
        phi.push(prev);
    }
    BlochSamples {
        k,
        h,
        sigma,
        phi,
        phase_reliable,
        coeffs: c.clone(),
    }
}

/// Principal-branch phase of `a / b`, in `(-pi, pi]`, computed without the
/// division so tiny moduli cannot overflow.
fn principal_arg_ratio(a: C64, b: C64) -> f64 {
    (a * b.conj()).arg()
}

/// Largest fraction of `pi` covered by a single phase step; beyond this the
/// discrete winding can silently alias, so the computation is rejected and
/// the caller must refine the grid.
const MAX_STEP_FRACTION: f64 = 0.9;

/// Residual tolerance of the integrality check on the accumulated winding.
const WINDING_RESIDUAL: f64 = 1e-6;

/// Winding number of the band about the origin: accumulated principal-branch
/// phase steps around the Brillouin zone (wrap step included), divided by
/// `2*pi`.
///
/// Errors with [`Error::OriginOnCurve`] when the curve passes through the
/// origin within tolerance (a topological transition), and with
/// [`Error::NonIntegerWinding`] when the accumulated phase either fails the
/// integrality check or contains a single step so large (`> 0.9*pi`) that
/// the discretization cannot be trusted; callers should then double the
/// grid.
pub fn winding(s: &BlochSamples, tol: &Tolerances) -> Result<i64> {
    let max_sigma = s.max_sigma();
    let min_sigma = s.min_sigma();
    if max_sigma == 0.0 || min_sigma <= tol.eps_zero * max_sigma {
        return Err(Error::OriginOnCurve(if max_sigma == 0.0 {
            0.0
        } else {
            min_sigma / max_sigma
        }));
    }
    let n = s.n_k();
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    for j in 0..n {
        let step = principal_arg_ratio(s.h[(j + 1) % n], s.h[j]);
        max_step = max_step.max(step.abs());
        total += step;
    }
    let raw = total / TAU;
    let rounded = raw.round();
    let residual = (raw - rounded).abs();
    if residual > WINDING_RESIDUAL || max_step > MAX_STEP_FRACTION * PI {
        return Err(Error::NonIntegerWinding(raw, residual.max(max_step / PI)));
    }
    Ok(rounded as i64)
}

/// Signed area enclosed by the sampled band (shoelace rule over the closed
/// polygon).  Positive for counter-clockwise traversal.
pub fn enclosed_area(s: &BlochSamples) -> f64 {
    let n = s.n_k();
    let mut twice = 0.0;
    for j in 0..n {
        let a = s.h[j];
        let b = s.h[(j + 1) % n];
        twice += a.re * b.im - b.re * a.im;
    }
    twice / 2.0
}

/// Whether the band curve has interior: `|area| > eps_area * (max sigma)^2`.
pub fn point_gap_open(s: &BlochSamples, tol: &Tolerances) -> bool {
    let scale = s.max_sigma();
    scale > 0.0 && enclosed_area(s).abs() > tol.eps_area * scale * scale
}

/// The gap `Delta = min_k |H(k)|`, refined off-grid by golden-section search
/// around the coarse minimum.
///
/// Degenerate spectra (no interior) are rejected: a distance-to-origin for a
/// curve without interior does not separate topological sectors.
pub fn nh_gap(s: &BlochSamples, tol: &Tolerances) -> Result<f64> {
    if !point_gap_open(s, tol) {
        return Err(Error::DegenerateSpectrum);
    }
    let n = s.n_k();
    let j0 = s
        .sigma
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, _)| j)
        .expect("nonempty grid");
    let step = TAU / n as f64;
    let center = s.k[j0];
    let refined = golden_min(
        |k| model::bloch(&s.coeffs, k).norm(),
        center - step,
        center + step,
    );
    Ok(refined.min(s.sigma[j0]))
}

/// Golden-section minimization of a unimodal scalar function on `[a, b]`.
fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..90 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd)
}

/// Residuals of the banded normality test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormalityReport {
    /// Verdict: both band-condition families hold within `eps_norm`.
    pub normal: bool,
    /// Largest relative residual of
    /// `conj(mu_l) mu_l' = mu_{-l} conj(mu_{-l'})` over `1 <= l, l' <= L`
    /// (this single complex identity combines the modulus and phase-sum
    /// conditions).
    pub band_residual: f64,
    /// Relative Frobenius norm of the finite-matrix commutator
    /// `H H^dag - H^dag H`, an independent cross-check.
    pub commutator_residual: f64,
}

/// Test whether the Toeplitz family is normal.
///
/// The matrix commutes with its adjoint iff for every pair of shells
/// `1 <= l, l' <= L` the bands satisfy
/// `conj(mu_l) mu_l' = mu_{-l} conj(mu_{-l'})` — equivalently, the moduli
/// products `|mu_l||mu_l'| = |mu_{-l}||mu_{-l'}|` match and the phase sums
/// `arg mu_l + arg mu_{-l}` agree across shells.  The on-site coefficient
/// never enters: `mu_0 * identity` commutes with everything.
pub fn normality(c: &ToeplitzCoefficients, tol: &Tolerances) -> NormalityReport {
    let ll = c.range() as i64;
    let scale = (1..=ll)
        .flat_map(|l| [c.mu(l).norm(), c.mu(-l).norm()])
        .fold(0.0, f64::max);
    let mut band_residual = 0.0f64;
    if scale > 0.0 {
        for l in 1..=ll {
            for lp in 1..=ll {
                let r = (c.mu(l).conj() * c.mu(lp) - c.mu(-l) * c.mu(-lp).conj()).norm();
                band_residual = band_residual.max(r / (scale * scale));
            }
        }
    }
    let commutator_residual = commutator_residual(c);
    NormalityReport {
        normal: band_residual <= tol.eps_norm,
        band_residual,
        commutator_residual,
    }
}

/// `||H H^dag - H^dag H||_F / ||H||_F^2` on a small open-boundary matrix
/// (interior contributions cancel for any Toeplitz matrix; only boundary
/// blocks can survive, so a small matrix already decides).
fn commutator_residual(c: &ToeplitzCoefficients) -> f64 {
    let n = (4 * c.range() + 4).max(8);
    let h = build_obc(c, n).expect("size chosen above the range").matrix;
    let hd = adjoint_of(&h);
    let comm = h.dot(&hd) - hd.dot(&h);
    let num = frobenius(&comm);
    let den = frobenius(&h);
    if den == 0.0 {
        0.0
    } else {
        num / (den * den)
    }
}

fn adjoint_of(m: &Array2<C64>) -> Array2<C64> {
    let (r, c) = m.dim();
    Array2::from_shape_fn((c, r), |(i, j)| m[[j, i]].conj())
}

fn frobenius(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Result of the mirror-symmetry scan of the band curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReciprocityReport {
    /// Verdict: some symmetry center reproduces the curve within `eps_rec`.
    pub reciprocal: bool,
    /// Best symmetry center `k_0` (grid or half-grid point, in `[0, pi)`).
    pub center_k: f64,
    /// Relative mismatch `max_k |H(k_0+k) - H(k_0-k)| / max sigma` at the
    /// best center.
    pub residual: f64,
}

/// Scan for a momentum-inversion center: reciprocity holds iff there exists
/// `k_0` with `H(k_0 + k) = H(k_0 - k)` for all `k`.  On an `n`-point grid
/// every candidate center maps index `j` to `m - j` for some integer `m`, so
/// the scan over `m` covers all grid and half-grid centers exactly.
pub fn reciprocity(s: &BlochSamples, tol: &Tolerances) -> ReciprocityReport {
    let n = s.n_k();
    let max_sigma = s.max_sigma();
    if max_sigma == 0.0 {
        return ReciprocityReport {
            reciprocal: true,
            center_k: 0.0,
            residual: 0.0,
        };
    }
    let mut best = f64::INFINITY;
    let mut best_m = 0usize;
    for m in 0..n {
        let mut worst = 0.0f64;
        for j in 0..n {
            let mirrored = s.h[(m + n - j % n) % n];
            let d = (mirrored - s.h[j]).norm();
            if d > worst {
                worst = d;
            }
            if worst >= best {
                break;
            }
        }
        if worst < best {
            best = worst;
            best_m = m;
        }
    }
    let residual = best / max_sigma;
    ReciprocityReport {
        reciprocal: residual < tol.eps_rec,
        center_k: PI * best_m as f64 / n as f64,
        residual,
    }
}

/// Topological class of the band curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WindingClass {
    /// Open point gap with the origin strictly off the curve.
    Integer(i64),
    /// Curve with no interior; no winding is assigned.
    Degenerate,
    /// Curve with interior passing through the origin within tolerance: the
    /// system sits at a topological transition, not in a phase.
    AtTransition,
}

impl WindingClass {
    /// The integer winding, if the system is in a point-gapped phase.
    pub fn as_integer(&self) -> Option<i64> {
        match self {
            WindingClass::Integer(v) => Some(*v),
            _ => None,
        }
    }
}

/// Full classification of a coefficient set.
#[derive(Debug, Clone, Serialize)]
pub struct TopologyReport {
    /// Winding class (integer / degenerate / at-transition).
    pub winding: WindingClass,
    /// `min_k |H(k)|`, refined off-grid; absent for degenerate spectra.
    pub nh_gap: Option<f64>,
    /// Signed enclosed area of the band curve.
    pub enclosed_area: f64,
    /// Area test verdict: the curve has interior.
    pub point_gap_open: bool,
    /// Banded normality verdict.
    pub normal: bool,
    /// Mirror-symmetry verdict.
    pub reciprocal: bool,
    /// Detailed normality residuals.
    pub normality: NormalityReport,
    /// Detailed reciprocity scan result.
    pub reciprocity: ReciprocityReport,
    /// Size of the momentum grid actually used.
    pub n_k: usize,
}

/// Classify a coefficient set on an `n_k` grid.
///
/// Fails with [`Error::NonIntegerWinding`] when the grid cannot resolve the
/// phase; see [`classify_adaptive`] for the self-refining variant.
pub fn classify(c: &ToeplitzCoefficients, n_k: usize, tol: &Tolerances) -> Result<TopologyReport> {
    let s = sample(c, n_k, tol);
    let area = enclosed_area(&s);
    let open = point_gap_open(&s, tol);
    let norm = normality(c, tol);
    let rec = reciprocity(&s, tol);
    let (class, gap) = if !open {
        (WindingClass::Degenerate, None)
    } else {
        let gap = Some(nh_gap(&s, tol)?);
        match winding(&s, tol) {
            Ok(nu) => (WindingClass::Integer(nu), gap),
            Err(Error::OriginOnCurve(_)) => (WindingClass::AtTransition, gap),
            Err(e) => return Err(e),
        }
    };
    Ok(TopologyReport {
        winding: class,
        nh_gap: gap,
        enclosed_area: area,
        point_gap_open: open,
        normal: norm.normal,
        reciprocal: rec.reciprocal,
        normality: norm,
        reciprocity: rec,
        n_k: s.n_k(),
    })
}

/// Like [`classify`], but doubles the grid (up to `max_doublings` times)
/// whenever the winding fails its resolution checks.
pub fn classify_adaptive(
    c: &ToeplitzCoefficients,
    n_k: usize,
    max_doublings: u32,
    tol: &Tolerances,
) -> Result<TopologyReport> {
    let mut n = n_k;
    let mut attempt = 0;
    loop {
        match classify(c, n, tol) {
            Err(Error::NonIntegerWinding(..)) if attempt < max_doublings => {
                attempt += 1;
                n *= 2;
            }
            other => return other,
        }
    }
}
