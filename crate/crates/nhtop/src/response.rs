//! Linear response of the driven chain: susceptibility and scattering
//! matrices, the zero-mode decomposition of the susceptibility, directional
//! gain and its scaling with system size, dynamical stability, and detuning
//! sweeps.
//!
//! The susceptibility `chi(omega) = -i (omega 1 - H)^(-1)` is the map from a
//! weak coherent probe to the steady-state field.  In the topological phase
//! its largest entries are carried almost entirely by the zero singular
//! modes, producing directional amplification that grows exponentially with
//! the number of sites while the reverse direction is attenuated by the same
//! factor.

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::bloch::{self, WindingClass};
use crate::error::{Error, Result};
use crate::model::{build_obc, coefficients, LatticeParams, ObcHamiltonian, ToeplitzCoefficients};
use crate::svd::{self, detect_zsm, svd_matrix, SvdResult};
use crate::tol::Tolerances;
use crate::C64;

/// Probe coupling (reduced units) used for the scattering matrix when the
/// caller does not specify one: nonzero but weak; always recorded in the
/// report.
pub const DEFAULT_GAMMA_PROBE: f64 = 0.2;

/// Susceptibility and scattering data at one probe frequency.
#[derive(Debug, Clone)]
pub struct ResponseReport {
    /// Probe frequency in reduced units; 0 is resonance with the drive.
    pub omega: f64,
    /// Probe coupling used for the scattering matrix.
    pub gamma_probe: f64,
    /// `chi(omega) = -i (omega 1 - H)^(-1)`.
    pub chi: Array2<C64>,
    /// `S(omega) = 1 + gamma_probe * chi(omega)`.
    pub s_matrix: Array2<C64>,
    /// `|chi_(N,1)|^2`: transmission gain from the first to the last site.
    pub forward_gain: f64,
    /// `|chi_(1,N)|^2`: the reverse direction.
    pub reverse_gain: f64,
    /// `max_(m,n) | |chi_mn| - |chi_nm| | / max |chi|`.
    pub nonreciprocity: f64,
    /// True iff every eigenvalue decays (`max Im lambda < 0`).
    pub stable: bool,
    /// The stability margin itself.
    pub max_im_eigenvalue: f64,
    /// `|| (omega 1 - H) (i chi) - 1 ||_F / sqrt(N)`; at most 1e-10 in any
    /// report that is returned at all.
    pub inversion_residual: f64,
}

/// Compute the susceptibility report at probe frequency `omega`.
///
/// The inversion goes through the SVD of `A = omega 1 - H`, so near-singular
/// probes degrade gracefully and the zero-mode decomposition can reuse the
/// same factorization.  Fails with [`Error::SingularAtProbe`] when `omega`
/// sits on a resonance of the finite system (smallest singular value of `A`
/// at the zero threshold).
pub fn susceptibility(
    h: &ObcHamiltonian,
    omega: f64,
    gamma_probe: Option<f64>,
    tol: &Tolerances,
) -> Result<ResponseReport> {
    let gamma_probe = gamma_probe.unwrap_or(DEFAULT_GAMMA_PROBE);
    if !(gamma_probe >= 0.0) || !omega.is_finite() {
        return Err(Error::InvalidParams(format!(
            "probe parameters must be finite with gamma_probe >= 0, got omega = {omega}, gamma_probe = {gamma_probe}"
        )));
    }
    let n = h.n;
    let a = probe_matrix(h, omega);
    let r = svd_matrix(&a)?;
    guard_probe(&r, omega, tol)?;
    let chi = chi_from_svd(&r, 0);

    let mut s_matrix = chi.mapv(|z| gamma_probe * z);
    for i in 0..n {
        s_matrix[[i, i]] += 1.0;
    }

    let forward_gain = chi[[n - 1, 0]].norm_sqr();
    let reverse_gain = chi[[0, n - 1]].norm_sqr();

    let mut asym = 0.0f64;
    let mut amax = 0.0f64;
    for m in 0..n {
        for q in 0..n {
            amax = amax.max(chi[[m, q]].norm());
            if q > m {
                asym = asym.max((chi[[m, q]].norm() - chi[[q, m]].norm()).abs());
            }
        }
    }
    let nonreciprocity = if amax > 0.0 { asym / amax } else { 0.0 };

    let max_im_eigenvalue = svd::max_im_eigenvalue(h)?;

    // residual of A (i chi) = 1
    let ichi = chi.mapv(|z| C64::new(0.0, 1.0) * z);
    let prod = a.dot(&ichi);
    let mut res = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            res += (prod[[i, j]] - expect).norm_sqr();
        }
    }
    let inversion_residual = res.sqrt() / (n as f64).sqrt();

    Ok(ResponseReport {
        omega,
        gamma_probe,
        chi,
        s_matrix,
        forward_gain,
        reverse_gain,
        nonreciprocity,
        stable: max_im_eigenvalue < 0.0,
        max_im_eigenvalue,
        inversion_residual,
    })
}

/// `A = omega 1 - H`.
fn probe_matrix(h: &ObcHamiltonian, omega: f64) -> Array2<C64> {
    let mut a = h.matrix.mapv(|z| -z);
    for i in 0..h.n {
        a[[i, i]] += C64::new(omega, 0.0);
    }
    a
}

/// Reject probes at a resonance: the smallest singular value of `A` must
/// clear the zero threshold, measured against `max(||A||, |omega|)` — a
/// two-sided bracket of `||H||`.
fn guard_probe(r: &SvdResult, omega: f64, tol: &Tolerances) -> Result<()> {
    let min = r.sigma.first().copied().unwrap_or(0.0);
    let max = r.sigma.last().copied().unwrap_or(0.0);
    let scale = max.max(omega.abs());
    if scale == 0.0 || min <= tol.eps_zero * scale {
        return Err(Error::SingularAtProbe {
            omega,
            min_sigma: min,
        });
    }
    Ok(())
}

/// `chi = -i V Sigma^(-1) U^dag`, keeping only singular triples with index
/// `>= from` (0 keeps everything; `from = count` would drop the zero modes).
fn chi_from_svd(r: &SvdResult, from: usize) -> Array2<C64> {
    let n = r.n();
    let mut w = Array2::<C64>::zeros((n, n));
    for j in from..n {
        let inv = 1.0 / r.sigma[j];
        for m in 0..n {
            w[[m, j]] = r.v[[m, j]] * inv;
        }
    }
    let uh = conj_transpose(&r.u);
    w.dot(&uh).mapv(|z| C64::new(0.0, -1.0) * z)
}

/// `chi` truncated TO the zero modes: triples with index `< count` only.
fn chi_zsm_only(r: &SvdResult, count: usize) -> Array2<C64> {
    let n = r.n();
    let mut w = Array2::<C64>::zeros((n, n));
    for j in 0..count {
        let inv = 1.0 / r.sigma[j];
        for m in 0..n {
            w[[m, j]] = r.v[[m, j]] * inv;
        }
    }
    let uh = conj_transpose(&r.u);
    w.dot(&uh).mapv(|z| C64::new(0.0, -1.0) * z)
}

fn conj_transpose(m: &Array2<C64>) -> Array2<C64> {
    let (r, c) = m.dim();
    let mut out = Array2::zeros((c, r));
    for i in 0..r {
        for j in 0..c {
            out[[j, i]] = m[[i, j]].conj();
        }
    }
    out
}

/// Steady-state field `alpha = -sqrt(gamma_probe) * chi * alpha_in` for a
/// coherent drive vector.
pub fn steady_state(report: &ResponseReport, drive: &[C64]) -> Result<Vec<C64>> {
    let n = report.chi.nrows();
    if drive.len() != n {
        return Err(Error::InvalidParams(format!(
            "drive vector has {} entries for an {n}-site chain",
            drive.len()
        )));
    }
    let g = report.gamma_probe.sqrt();
    Ok((0..n)
        .map(|m| {
            let mut acc = C64::new(0.0, 0.0);
            for q in 0..n {
                acc += report.chi[[m, q]] * drive[q];
            }
            -g * acc
        })
        .collect())
}

/// Split of the susceptibility into zero-mode and bulk contributions.
#[derive(Debug, Clone)]
pub struct ZsmDecomposition {
    /// How many singular triples the truncation keeps (the zero-mode count
    /// of `omega 1 - H`); 0 means the truncation is not applicable.
    pub terms: usize,
    /// The gap of the shifted band `omega - H(k)` used for the detection.
    pub delta: f64,
    /// The full susceptibility.
    pub chi_full: Array2<C64>,
    /// `-i sum_(j < terms) sigma_j^(-1) |v_j><u_j|`; `None` when `terms = 0`.
    pub chi_truncated: Option<Array2<C64>>,
    /// `||chi_full - chi_truncated||_F / ||chi_full||_F`; `None` when
    /// `terms = 0`.
    pub residual: Option<f64>,
}

/// Expand `chi(omega)` in the singular triples of `A = omega 1 - H` and
/// truncate to the zero modes.
///
/// The detection gap is `min_k |omega - H(k)|` computed from the band
/// coefficients (the point-gap distance from the probe frequency to the
/// periodic spectrum); pass `delta` to override, which is also the only way
/// to decompose a matrix without band coefficients.  In the trivial regime
/// (count 0) the truncation is reported as not applicable rather than an
/// error.
pub fn zsm_decomposition(
    h: &ObcHamiltonian,
    omega: f64,
    delta: Option<f64>,
    tol: &Tolerances,
) -> Result<ZsmDecomposition> {
    let delta = match delta {
        Some(d) if d > 0.0 => d,
        Some(d) => {
            return Err(Error::InvalidParams(format!(
                "decomposition gap must be positive, got {d}"
            )))
        }
        None => {
            let c = h.coeffs.as_ref().ok_or_else(|| {
                Error::InvalidParams(
                    "no band coefficients to derive the gap from; pass one explicitly".into(),
                )
            })?;
            let shifted = shift_bands(c, omega)?;
            let s = bloch::sample(&shifted, bloch::default_n_k(h.n), tol);
            bloch::nh_gap(&s, tol)?
        }
    };
    let a = probe_matrix(h, omega);
    let r = svd_matrix(&a)?;
    guard_probe(&r, omega, tol)?;
    let report = detect_zsm(&r, delta)?;
    let chi_full = chi_from_svd(&r, 0);
    if report.count == 0 {
        return Ok(ZsmDecomposition {
            terms: 0,
            delta,
            chi_full,
            chi_truncated: None,
            residual: None,
        });
    }
    let chi_truncated = chi_zsm_only(&r, report.count);
    let mut diff = 0.0f64;
    let mut full = 0.0f64;
    for i in 0..h.n {
        for j in 0..h.n {
            diff += (chi_full[[i, j]] - chi_truncated[[i, j]]).norm_sqr();
            full += chi_full[[i, j]].norm_sqr();
        }
    }
    Ok(ZsmDecomposition {
        terms: report.count,
        delta,
        chi_full,
        chi_truncated: Some(chi_truncated),
        residual: Some((diff / full).sqrt()),
    })
}

/// Band coefficients of `omega 1 - H`: `mu_0 -> omega - mu_0`, `mu_l -> -mu_l`.
fn shift_bands(c: &ToeplitzCoefficients, omega: f64) -> Result<ToeplitzCoefficients> {
    let ll = c.range() as i64;
    let bands: Vec<C64> = (-ll..=ll)
        .map(|l| {
            if l == 0 {
                C64::new(omega, 0.0) - c.mu(0)
            } else {
                -c.mu(l)
            }
        })
        .collect();
    ToeplitzCoefficients::from_bands(bands)
}

/// Number of amplification channels carried by a susceptibility matrix:
/// singular values within a factor 10 of the largest.
pub fn channel_count(chi: &Array2<C64>) -> Result<usize> {
    let r = svd_matrix(chi)?;
    let max = r.sigma.last().copied().unwrap_or(0.0);
    if max == 0.0 {
        return Ok(0);
    }
    Ok(r.sigma.iter().filter(|&&s| s >= max / 10.0).count())
}

/// Gain at one system size.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GainRow {
    /// Number of sites.
    pub n: usize,
    /// `|chi_(N,1)|^2`, absent when the probe is singular at this size.
    pub forward_gain: Option<f64>,
    /// `|chi_(1,N)|^2`, absent when the probe is singular at this size.
    pub reverse_gain: Option<f64>,
    /// Dynamical stability at this size.
    pub stable: bool,
}

/// Gain as a function of system size with a fitted exponential rate.
#[derive(Debug, Clone, Serialize)]
pub struct GainScaling {
    /// Probe frequency.
    pub omega: f64,
    /// Per-size gains, in the order of the requested sizes.
    pub rows: Vec<GainRow>,
    /// Least-squares slope of `ln(forward gain)` vs `N` over the stable
    /// rows with finite gain; `None` with fewer than two usable rows.
    pub slope: Option<f64>,
}

/// Forward/reverse gain over a list of sizes and the exponential rate of the
/// forward gain.  A positive slope certifies amplification that grows
/// exponentially with the number of sites; unstable or probe-singular sizes
/// are flagged and left out of the fit.
pub fn gain_scaling(
    p: &LatticeParams,
    omega: f64,
    n_list: &[usize],
    tol: &Tolerances,
) -> Result<GainScaling> {
    let c = coefficients(p);
    let rows: Vec<GainRow> = n_list
        .par_iter()
        .map(|&n| -> Result<GainRow> {
            let h = build_obc(&c, n)?;
            match susceptibility(&h, omega, None, tol) {
                Ok(rep) => Ok(GainRow {
                    n,
                    forward_gain: Some(rep.forward_gain),
                    reverse_gain: Some(rep.reverse_gain),
                    stable: rep.stable,
                }),
                Err(Error::SingularAtProbe { .. }) => Ok(GainRow {
                    n,
                    forward_gain: None,
                    reverse_gain: None,
                    stable: svd::max_im_eigenvalue(&h)? < 0.0,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for row in &rows {
        if let (true, Some(g)) = (row.stable, row.forward_gain) {
            if g > 0.0 {
                xs.push(row.n as f64);
                ys.push(g.ln());
            }
        }
    }
    let slope = if xs.len() >= 2 {
        Some(slope_of(&xs, &ys))
    } else {
        None
    };
    Ok(GainScaling { omega, rows, slope })
}

fn slope_of(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Dynamical stability of a finite chain, with the periodic-boundary
/// comparison that separates convective from absolute instabilities.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityReport {
    /// `max Im lambda < 0` over the finite spectrum.
    pub stable: bool,
    /// The margin itself.
    pub max_im_eigenvalue: f64,
    /// `max_k Im H(k)` on a dense grid; present when band coefficients are
    /// available and the matrix is clean (the symbol describes the matrix).
    pub pbc_max_im: Option<f64>,
    /// Present with `pbc_max_im`: the periodic spectrum reaches into the
    /// amplifying half-plane while the finite chain still decays — signal
    /// growth that propagates away faster than it grows in place.
    pub convective: Option<bool>,
}

/// Classify dynamical stability through the exact/graded eigenvalue paths.
pub fn stability(h: &ObcHamiltonian, tol: &Tolerances) -> Result<StabilityReport> {
    let max_im = svd::max_im_eigenvalue(h)?;
    let stable = max_im < 0.0;
    let pbc_max_im = match (&h.coeffs, h.disordered) {
        (Some(c), false) => {
            let s = bloch::sample(c, bloch::default_n_k(h.n), tol);
            Some(
                s.h.iter()
                    .map(|z| z.im)
                    .fold(f64::NEG_INFINITY, f64::max),
            )
        }
        _ => None,
    };
    Ok(StabilityReport {
        stable,
        max_im_eigenvalue: max_im,
        pbc_max_im,
        convective: pbc_max_im.map(|p| p > 0.0 && stable),
    })
}

/// Closed-form open-boundary eigenvalues of a nearest-neighbor chain:
/// `lambda_m = mu_0 + 2 sqrt(mu_(+1) mu_(-1)) cos(m pi / (N+1))`,
/// `m = 1..=N` (the branch of the square root does not change the set).
///
/// At an exceptional point one hopping direction vanishes, the square root
/// with it, and the whole spectrum collapses onto `mu_0 = -delta - i`: the
/// matrix is then a maximally defective single Jordan block.
pub fn closed_form_eigenvalues(c: &ToeplitzCoefficients, n: usize) -> Result<Vec<C64>> {
    if c.range() != 1 {
        return Err(Error::InvalidParams(format!(
            "closed-form spectrum requires range L = 1, got L = {}",
            c.range()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParams("chain must have at least one site".into()));
    }
    // one band numerically dead (exceptional point): the product under the
    // root is pure cancellation dust, and the square root would amplify it
    // from ~1e-17 to ~1e-8; the defective limit has a vanishing root
    let (pn, mn) = (c.mu(1).norm(), c.mu(-1).norm());
    let root = if pn.min(mn) <= 1e-12 * pn.max(mn) {
        C64::new(0.0, 0.0)
    } else {
        (c.mu(1) * c.mu(-1)).sqrt()
    };
    Ok((1..=n)
        .map(|m| c.mu(0) + 2.0 * root * (m as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
        .collect())
}

/// One row of a detuning sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    /// The detuning of this row.
    pub delta: f64,
    /// Winding classification at this detuning.
    pub winding: WindingClass,
    /// Band gap, when the point gap is open.
    pub nh_gap: Option<f64>,
    /// Zero-mode count at the largest requested size; absent at transitions
    /// or when the half-gap separation is ambiguous.
    pub zsm_count: Option<usize>,
    /// Exponential gain rate over the requested sizes; absent without two
    /// usable sizes.
    pub gain_slope: Option<f64>,
}

/// Sweep the detuning: winding, gap, zero-mode count and gain rate per
/// `delta`, each computed at resonance (`omega = 0`; the detuning itself
/// moves the band through `mu_0`).  Rows come back in input order; the work
/// is parallel per row.
pub fn detuning_sweep(
    p: &LatticeParams,
    delta_list: &[f64],
    n_list: &[usize],
    tol: &Tolerances,
) -> Result<Vec<SweepRow>> {
    if n_list.is_empty() {
        return Err(Error::InvalidParams("need at least one system size".into()));
    }
    let n_zsm = *n_list.iter().max().expect("nonempty");
    delta_list
        .par_iter()
        .map(|&delta| -> Result<SweepRow> {
            let pd = LatticeParams::new(
                p.lambda.clone(),
                p.cooperativity.clone(),
                p.theta.clone(),
                delta,
                p.gamma_eff,
            )?;
            let c = coefficients(&pd);
            let topo = bloch::classify_adaptive(&c, 1024, 3, tol)?;
            let zsm_count = match topo.nh_gap {
                Some(gap) => {
                    let h = build_obc(&c, n_zsm)?;
                    match detect_zsm(&svd::svd(&h)?, gap) {
                        Ok(rep) => Some(rep.count),
                        Err(Error::AmbiguousSeparation { .. }) => None,
                        Err(e) => return Err(e),
                    }
                }
                None => None,
            };
            let gain_slope = gain_scaling(&pd, 0.0, n_list, tol)?.slope;
            Ok(SweepRow {
                delta,
                winding: topo.winding,
                nh_gap: topo.nh_gap,
                zsm_count,
                gain_slope,
            })
        })
        .collect()
}

/// Locate the detuning where the winding number changes, by bisection.
///
/// The endpoints must carry well-defined, different winding numbers.  The
/// search returns either a point the classifier flags as exactly at the
/// transition, or the bracket midpoint once the bracket is narrower than
/// `tol_delta`.
pub fn bisect_winding_transition(
    p: &LatticeParams,
    lo: f64,
    hi: f64,
    tol_delta: f64,
    tol: &Tolerances,
) -> Result<f64> {
    if !(tol_delta > 0.0) || !(hi > lo) {
        return Err(Error::InvalidParams(format!(
            "need an ordered bracket and positive resolution, got [{lo}, {hi}] at {tol_delta}"
        )));
    }
    let class_at = |delta: f64| -> Result<WindingClass> {
        let pd = LatticeParams::new(
            p.lambda.clone(),
            p.cooperativity.clone(),
            p.theta.clone(),
            delta,
            p.gamma_eff,
        )?;
        Ok(bloch::classify_adaptive(&coefficients(&pd), 1024, 3, tol)?.winding)
    };
    let w_lo = match class_at(lo)? {
        WindingClass::Integer(w) => w,
        other => {
            return Err(Error::InvalidParams(format!(
                "left endpoint has no well-defined winding ({other:?})"
            )))
        }
    };
    let w_hi = match class_at(hi)? {
        WindingClass::Integer(w) => w,
        other => {
            return Err(Error::InvalidParams(format!(
                "right endpoint has no well-defined winding ({other:?})"
            )))
        }
    };
    if w_lo == w_hi {
        return Err(Error::InvalidParams(format!(
            "endpoints carry the same winding {w_lo}; nothing to bracket"
        )));
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol_delta {
        let mid = 0.5 * (lo + hi);
        match class_at(mid)? {
            WindingClass::Integer(w) if w == w_lo => lo = mid,
            WindingClass::Integer(_) => hi = mid,
            // the classifier landed exactly on the closing of the gap
            WindingClass::AtTransition | WindingClass::Degenerate => return Ok(mid),
        }
    }
    Ok(0.5 * (lo + hi))
}
