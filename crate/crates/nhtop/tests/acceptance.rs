//! Acceptance suite: every headline quantitative claim of the library,
//! one test per claim, asserted at its stated tolerance.  Each test prints a
//! single verdict line with the measured numbers (shown with `--nocapture`).

use std::f64::consts::PI;

use ndarray::ArrayView1;
use nhtop::bloch::{self, WindingClass};
use nhtop::disorder::{self, DisorderKind, DisorderSpec};
use nhtop::gssh;
use nhtop::model::{build_obc, coefficients, LatticeParams, ToeplitzCoefficients};
use nhtop::response;
use nhtop::svd;
use nhtop::{Tolerances, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

/// Nearest-neighbor chain in the (theta, Lambda, C) order used by the
/// reference parameter tables, at zero detuning.
fn nn(theta: f64, lambda: f64, coop: f64) -> ToeplitzCoefficients {
    coefficients(&LatticeParams::nearest_neighbor(lambda, coop, theta, 0.0))
}

fn random_params(rng: &mut ChaCha8Rng) -> LatticeParams {
    let l = rng.gen_range(1..=3usize);
    let lambda = (0..l)
        .map(|_| C64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)))
        .collect();
    let coop = (0..l).map(|_| rng.gen_range(0.0..2.0)).collect();
    let theta = (0..l).map(|_| rng.gen_range(-PI..PI)).collect();
    let delta = rng.gen_range(-1.5..1.5);
    LatticeParams::new(lambda, coop, theta, delta, 1.0).expect("in-domain draw")
}

fn overlap(a: ArrayView1<'_, C64>, b: ArrayView1<'_, C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.conj() * y)
        .sum::<C64>()
        .norm()
}

fn argmax_norm(v: &[C64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
        .map(|(i, _)| i)
        .unwrap()
}

/// Largest distance from any point of `from` to its nearest point in `to`.
fn worst_nearest(from: &[C64], to: &[C64]) -> f64 {
    from.iter()
        .map(|a| {
            to.iter()
                .map(|b| (a - b).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

#[test]
fn acceptance_01_winding_classification_of_the_reference_rows() {
    let t = tol();
    let top = bloch::classify(&nn(0.0, 2.0, 0.5), 1024, &t).unwrap();
    assert_eq!(top.winding, WindingClass::Degenerate, "zero-flux row");
    let mid = bloch::classify(&nn(PI / 2.0, 2.0, 0.5), 1024, &t).unwrap();
    assert_eq!(mid.winding, WindingClass::Integer(0), "weak-coupling row");
    let bot = bloch::classify(&nn(PI / 2.0, 2.0, 1.8), 1024, &t).unwrap();
    assert_eq!(bot.winding, WindingClass::Integer(-1), "strong-coupling row");
    println!(
        "acceptance 01 winding classification: PASS — degenerate / 0 / -1 \
         (areas {:.3e}, {:.3e}, {:.3e})",
        top.enclosed_area, mid.enclosed_area, bot.enclosed_area
    );
}

fn two_channel(c2: f64) -> LatticeParams {
    LatticeParams::new(
        vec![C64::new(0.3, 0.0), C64::new(2.0, 0.0)],
        vec![0.3, c2],
        vec![PI / 2.0, PI / 2.0],
        0.0,
        1.0,
    )
    .unwrap()
}

#[test]
fn acceptance_02_zero_mode_counting_matches_the_winding() {
    let t = tol();
    let n = 200;
    let mut measured = Vec::new();
    for (c2, expected) in [(0.5, 0usize), (0.9, 1), (1.8, 2)] {
        let c = coefficients(&two_channel(c2));
        let topo = bloch::classify_adaptive(&c, 1024, 3, &t).unwrap();
        let gap = topo.nh_gap.expect("point gap must be open");
        assert_eq!(
            topo.winding,
            WindingClass::Integer(-(expected as i64)),
            "winding at C2 = {c2}"
        );
        let r = svd::svd(&build_obc(&c, n).unwrap()).unwrap();
        let z = svd::detect_zsm(&r, gap).unwrap();
        assert_eq!(z.count, expected, "zero-mode count at C2 = {c2}");
        let dense = bloch::sample(&c, 8192, &t);
        let bulk: Vec<f64> = r.sigma[z.count..].to_vec();
        let d = svd::directed_hausdorff(&bulk, &dense.sigma);
        assert!(
            d <= 0.05 * gap,
            "bulk values stray {d} from the band (5% of gap = {})",
            0.05 * gap
        );
        measured.push(format!("C2={c2}: count {}, hausdorff {:.2e}", z.count, d));
    }

    // Deep in the two-mode phase both zero singular values are tiny already
    // at this size.
    let c18 = coefficients(&two_channel(1.8));
    let z18 = {
        let topo = bloch::classify_adaptive(&c18, 1024, 3, &t).unwrap();
        let r = svd::svd(&build_obc(&c18, n).unwrap()).unwrap();
        svd::detect_zsm(&r, topo.nh_gap.unwrap()).unwrap()
    };
    for s in &z18.zsv {
        assert!(*s < 1e-6, "zero singular value {s} too large at C2 = 1.8");
    }

    // Close to the lower transition (C2 = 0.9) the decay per site is only
    // ~0.972 (set by the symbol root just outside the unit circle), so the
    // zero mode needs more sites to reach the same smallness: verify the
    // exponential law and that the bound is met at the size it predicts.
    let c09 = coefficients(&two_channel(0.9));
    let s200 = svd::precise_min_singular_value(&build_obc(&c09, 200).unwrap()).unwrap();
    let s400 = svd::precise_min_singular_value(&build_obc(&c09, 400).unwrap()).unwrap();
    let per_site = (s400 / s200).powf(1.0 / 200.0);
    assert!(
        per_site < 0.98,
        "zero mode does not decay exponentially: per-site ratio {per_site}"
    );
    let s500 = svd::precise_min_singular_value(&build_obc(&c09, 500).unwrap()).unwrap();
    assert!(
        s500 < 1e-6,
        "zero singular value {s500} still too large at the size the decay \
         rate {per_site} predicts"
    );
    println!(
        "acceptance 02 bulk-boundary counting: PASS — {}; single-mode zero \
         value {s200:.2e} at 200 sites decaying x{per_site:.6}/site (below 1e-6 \
         from ~490 sites: {s500:.2e} at 500)",
        measured.join("; ")
    );
}

#[test]
fn acceptance_03_closed_form_zero_mode_and_its_size_scaling() {
    let t = tol();
    let c = nn(PI / 2.0, 1.5, 1.5);
    let n = 100;
    let ana = svd::analytic_hn_zsm(&c, n, &t).unwrap();
    let r = svd::svd(&build_obc(&c, n).unwrap()).unwrap();
    let ov_v = overlap(ana.v0.view(), r.right(0));
    let ov_u = overlap(ana.u0.view(), r.left(0));
    assert!(ov_v > 1.0 - 1e-8, "right-vector fidelity {ov_v}");
    assert!(ov_u > 1.0 - 1e-8, "left-vector fidelity {ov_u}");

    let fit = svd::localization_fit(r.right(0));
    let want = 1.5f64.ln();
    let rate_err = (fit.rate - want).abs() / want;
    assert!(rate_err < 0.01, "localization rate {} vs {want}", fit.rate);

    let sizes: Vec<usize> = (20..=120).step_by(10).collect();
    let logs: Vec<f64> = sizes
        .iter()
        .map(|&m| {
            svd::precise_min_singular_value(&build_obc(&c, m).unwrap())
                .unwrap()
                .ln()
        })
        .collect();
    let xs: Vec<f64> = sizes.iter().map(|&m| m as f64).collect();
    let slope = lsq_slope(&xs, &logs);
    let slope_err = (slope + want).abs() / want;
    assert!(slope_err < 0.02, "size-scaling slope {slope} vs {}", -want);
    println!(
        "acceptance 03 analytic zero mode: PASS — fidelities 1-{:.1e}/1-{:.1e}, \
         rate {:.6} (err {:.2e}), slope {:.6} (err {:.2e})",
        1.0 - ov_v,
        1.0 - ov_u,
        fit.rate,
        rate_err,
        slope,
        slope_err
    );
}

#[test]
fn acceptance_04_gap_law_and_transition_on_the_unidirectional_line() {
    let t = tol();
    let mut worst = 0.0f64;
    for cval in [0.25, 0.5, 1.5, 2.0] {
        let topo = bloch::classify_adaptive(&nn(PI / 2.0, cval, cval), 4096, 3, &t).unwrap();
        let gap = topo.nh_gap.unwrap();
        let err = (gap - (cval - 1.0).abs()).abs();
        assert!(err <= 1e-8, "gap {gap} at C = {cval} (err {err})");
        worst = worst.max(err);
        let expected = if cval < 1.0 { 0 } else { -1 };
        assert_eq!(topo.winding, WindingClass::Integer(expected), "C = {cval}");
    }

    let s = bloch::sample(&nn(PI / 2.0, 1.0, 1.0), 4096, &t);
    let gap_at_one = bloch::nh_gap(&s, &t).unwrap();
    assert!(gap_at_one < 1e-6, "gap at the transition is {gap_at_one}");

    // bisect the winding flip on the coupling axis
    let (mut lo, mut hi) = (0.5f64, 1.5f64);
    let c_star = loop {
        if hi - lo <= 1e-3 {
            break 0.5 * (lo + hi);
        }
        let mid = 0.5 * (lo + hi);
        match bloch::classify_adaptive(&nn(PI / 2.0, mid, mid), 1024, 3, &t) {
            Ok(topo) => match topo.winding {
                WindingClass::Integer(0) => lo = mid,
                WindingClass::Integer(-1) => hi = mid,
                _ => break mid,
            },
            // unresolvably close to the gap closing: that is the transition
            Err(_) => break mid,
        }
    };
    assert!(
        (c_star - 1.0).abs() <= 1e-3,
        "transition bracketed at {c_star}"
    );
    println!(
        "acceptance 04 gap law: PASS — worst |C-1| error {worst:.2e}, \
         gap at C=1 {gap_at_one:.2e}, transition at C = {c_star:.6}"
    );
}

#[test]
fn acceptance_05_doubled_chain_spectra_and_wilson_loops() {
    let t = tol();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0005);
    let mut gapped = 0usize;
    let mut worst_pair = 0.0f64;
    for _ in 0..20 {
        let p = random_params(&mut rng);
        let c = coefficients(&p);
        let n = rng.gen_range((2 * c.range() + 2).max(8)..=100);
        let h = build_obc(&c, n).unwrap();
        let sigma = svd::svd(&h).unwrap().sigma;
        let mut expected: Vec<f64> = sigma.iter().flat_map(|s| [*s, -*s]).collect();
        expected.sort_by(f64::total_cmp);
        let mut got = gssh::double(&h).eigendecomposition().unwrap().values;
        got.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(&expected) {
            let err = (g - e).abs();
            assert!(err <= 1e-10, "doubled eigenvalue {g} vs +/-sigma {e}");
            worst_pair = worst_pair.max(err);
        }
        if let Ok(topo) = bloch::classify_adaptive(&c, 512, 3, &t) {
            if let (WindingClass::Integer(nu), Some(gap)) = (topo.winding, topo.nh_gap) {
                if gap > 0.01 {
                    let zak = gssh::zak_invariant_of(&c, 4096, &t).unwrap();
                    assert_eq!(zak, nu, "Wilson loop vs winding for {p:?}");
                    gapped += 1;
                }
            }
        }
    }
    assert!(gapped >= 5, "only {gapped} of 20 draws were point-gapped");
    println!(
        "acceptance 05 doubled-chain equivalence: PASS — 20 sets, worst \
         eigenvalue mismatch {worst_pair:.2e}, Wilson loop checked on {gapped} gapped sets"
    );
}

#[test]
fn acceptance_06_two_channel_amplifier_steering() {
    let t = tol();
    let n = 30;
    let p = LatticeParams::new(
        vec![C64::new(0.05, 0.0), C64::new(2.0, 0.0)],
        vec![0.05, 1.9],
        vec![PI / 2.0, PI / 2.0],
        0.0,
        1.0,
    )
    .unwrap();
    let h = build_obc(&coefficients(&p), n).unwrap();
    let rep = response::susceptibility(&h, 0.0, None, &t).unwrap();

    let mut d1 = vec![C64::new(0.0, 0.0); n];
    d1[0] = C64::new(1.0, 0.0);
    let a1 = response::steady_state(&rep, &d1).unwrap();
    assert_eq!(argmax_norm(&a1), n - 2, "nearest-neighbor channel output");

    let mut d2 = vec![C64::new(0.0, 0.0); n];
    d2[1] = C64::new(1.0, 0.0);
    let a2 = response::steady_state(&rep, &d2).unwrap();
    assert_eq!(argmax_norm(&a2), n - 1, "next-nearest channel output");

    let rev1 = rep.chi[[0, n - 1]].norm_sqr();
    let rev2 = rep.chi[[1, n - 1]].norm_sqr();
    assert!(rev1 < 1.0 && rev2 < 1.0, "reverse gains {rev1}, {rev2}");

    let z = response::zsm_decomposition(&h, 0.0, None, &t).unwrap();
    assert_eq!(z.terms, 2, "zero-mode terms in the response");
    let resid = z.residual.unwrap();
    assert!(resid < 1e-3, "truncation residual {resid}");
    assert_eq!(response::channel_count(&rep.chi).unwrap(), 2);
    println!(
        "acceptance 06 two amplification channels: PASS — outputs at sites \
         {} and {}, reverse gains {rev1:.2e}/{rev2:.2e}, 2-term residual {resid:.2e}",
        n - 1,
        n
    );
}

#[test]
fn acceptance_07_closed_form_finite_chain_spectra() {
    let n = 30;
    let mut worst = 0.0f64;
    for (coop, lambda, theta) in [(0.5, 2.0, PI / 2.0), (1.5, 1.5, PI / 2.0), (1.0, 2.0, PI / 4.0)]
    {
        let c = nn(theta, lambda, coop);
        let closed = response::closed_form_eigenvalues(&c, n).unwrap();
        let numeric = svd::eigenvalues(&build_obc(&c, n).unwrap()).unwrap();
        let err = worst_nearest(&closed, &numeric).max(worst_nearest(&numeric, &closed));
        assert!(err <= 1e-8, "spectra differ by {err} at C = {coop}");
        worst = worst.max(err);
    }
    // at the unidirectional point the whole spectrum collapses onto mu_0
    let ep = response::closed_form_eigenvalues(&nn(PI / 2.0, 1.5, 1.5), n).unwrap();
    let mu0 = C64::new(0.0, -1.0);
    for lam in &ep {
        assert!((lam - mu0).norm() <= 1e-12, "collapsed eigenvalue {lam}");
    }
    println!(
        "acceptance 07 eigenvalue closed form: PASS — worst mismatch {worst:.2e}, \
         unidirectional spectrum collapses onto {mu0}"
    );
}

#[test]
fn acceptance_08_convective_instability_of_the_amplifying_phase() {
    let t = tol();
    let h = build_obc(&nn(PI / 2.0, 2.0, 1.8), 50).unwrap();
    let s = response::stability(&h, &t).unwrap();
    assert!(s.stable, "finite chain must be stable");
    assert!(s.max_im_eigenvalue < 0.0);
    let pbc = s.pbc_max_im.unwrap();
    assert!(pbc > 0.0, "periodic band must reach Im > 0, got {pbc}");
    assert_eq!(s.convective, Some(true));
    println!(
        "acceptance 08 convective stability: PASS — OBC max Im {:.6}, PBC max Im {:.6}",
        s.max_im_eigenvalue, pbc
    );
}

#[test]
fn acceptance_09_zero_modes_survive_decay_rate_disorder() {
    let t = tol();
    let (w, n) = (0.25, 50);
    let spec = DisorderSpec::new(DisorderKind::ImaginaryOnsite, w, 100, 61).unwrap();

    let p = LatticeParams::nearest_neighbor(2.0, 1.8, PI / 2.0, 0.0);
    let stats = disorder::ensemble(&p, n, &spec, &t).unwrap();
    assert_eq!(stats.clean_zsm_count, 1);
    assert_eq!(stats.zsm_survival, 1.0, "every realization keeps its zero mode");
    assert!(stats.max_sigma_shift <= w + 1e-12, "Weyl bound");

    // localization persists realization by realization, and the Weyl bound
    // holds value by value
    let h = build_obc(&coefficients(&p), n).unwrap();
    let clean_sigma = svd::svd(&h).unwrap().sigma;
    let mut min_edge = 1.0f64;
    for r in 0..spec.realizations {
        let xi = disorder::draw_xi(&spec, r, n);
        let rr = svd::svd(&disorder::apply_disorder(&h, &xi).unwrap()).unwrap();
        for (a, b) in rr.sigma.iter().zip(&clean_sigma) {
            assert!((a - b).abs() <= w + 1e-12, "Weyl bound violated: {}", (a - b).abs());
        }
        min_edge = min_edge.min(svd::edge_weight(rr.right(0)).0);
    }
    assert!(min_edge > 0.9, "zero-mode edge weight dropped to {min_edge}");

    let p0 = LatticeParams::nearest_neighbor(2.0, 0.5, PI / 2.0, 0.0);
    let stats0 = disorder::ensemble(&p0, n, &spec, &t).unwrap();
    assert_eq!(stats0.clean_zsm_count, 0);
    assert_eq!(stats0.zsm_survival, 1.0, "no realization grows a zero mode");
    assert!(stats0
        .min_sigma_distribution
        .iter()
        .all(|m| *m > stats0.clean_gap / 2.0));
    println!(
        "acceptance 09 disorder robustness: PASS — survival 1.00/1.00, max \
         value shift {:.4} <= {w}, min zero-mode edge weight {min_edge:.4}",
        stats.max_sigma_shift
    );
}

#[test]
fn acceptance_10_degenerate_counterexamples_and_the_gap_implication() {
    let t = tol();
    // two coherent channels with a relative phase: normal yet non-reciprocal
    let a = LatticeParams::new(
        vec![C64::new(2.0, 0.0), C64::new(0.0, 1.0)],
        vec![0.0, 0.0],
        vec![0.0, 0.0],
        0.0,
        1.0,
    )
    .unwrap();
    let ta = bloch::classify(&coefficients(&a), 1024, &t).unwrap();
    assert_eq!(ta.winding, WindingClass::Degenerate);
    assert!(ta.normal && !ta.reciprocal && !ta.point_gap_open);

    // symmetric bands from a pi-flux dissipative channel: non-normal yet
    // reciprocal
    let b = LatticeParams::new(
        vec![C64::new(2.0, 0.0), C64::new(0.0, 0.0)],
        vec![0.0, 1.0],
        vec![0.0, PI],
        0.0,
        1.0,
    )
    .unwrap();
    let tb = bloch::classify(&coefficients(&b), 1024, &t).unwrap();
    assert_eq!(tb.winding, WindingClass::Degenerate);
    assert!(!tb.normal && tb.reciprocal && !tb.point_gap_open);

    // sampled implication: an open point gap needs both non-normality and
    // non-reciprocity
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0010);
    let mut open = 0usize;
    for _ in 0..10_000 {
        let l = rng.gen_range(1..=3usize);
        let bands: Vec<C64> = (0..2 * l + 1)
            .map(|_| C64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)))
            .collect();
        let c = ToeplitzCoefficients::from_bands(bands).unwrap();
        let s = bloch::sample(&c, 256, &t);
        if bloch::point_gap_open(&s, &t) {
            open += 1;
            let norm = bloch::normality(&c, &t);
            assert!(!norm.normal, "open gap on a normal set: {c:?}");
            let rec = bloch::reciprocity(&s, &t);
            assert!(rec.reciprocal == false, "open gap on a reciprocal set: {c:?}");
        }
    }
    assert!(open >= 2_000, "only {open} of 10000 draws had an open gap");
    println!(
        "acceptance 10 counterexamples: PASS — both degenerate sets classified, \
         zero violations over {open} point-gapped draws of 10000"
    );
}

#[test]
fn acceptance_11_detuning_drives_the_topological_transition() {
    let t = tol();
    let base = |delta: f64| {
        LatticeParams::new(
            vec![C64::new(1.5, 0.0)],
            vec![1.5],
            vec![PI / 2.0],
            delta,
            1.0,
        )
        .unwrap()
    };
    let star = 1.25f64.sqrt();

    for (delta, expected) in [(1.0, -1i64), (-1.0, -1), (1.2, 0), (-1.2, 0)] {
        let topo =
            bloch::classify_adaptive(&coefficients(&base(delta)), 1024, 3, &t).unwrap();
        assert_eq!(topo.winding, WindingClass::Integer(expected), "delta = {delta}");
    }

    let right = response::bisect_winding_transition(&base(0.0), 0.8, 1.4, 1e-3, &t).unwrap();
    assert!((right - star).abs() <= 1e-3, "right transition at {right}");
    let left = response::bisect_winding_transition(&base(0.0), -1.4, -0.8, 1e-3, &t).unwrap();
    assert!((left + star).abs() <= 1e-3, "left transition at {left}");

    let n_list: Vec<usize> = (10..=40).step_by(5).collect();
    let inside = response::gain_scaling(&base(1.0), 0.0, &n_list, &t).unwrap();
    let s_in = inside.slope.unwrap();
    assert!(s_in > 0.0, "gain slope inside the phase: {s_in}");
    let outside = response::gain_scaling(&base(1.25), 0.0, &n_list, &t).unwrap();
    let s_out = outside.slope.unwrap();
    assert!(s_out < 0.0, "gain slope outside the phase: {s_out}");
    println!(
        "acceptance 11 detuning transition: PASS — brackets {right:.6}/{left:.6} \
         vs +/-{star:.6}, gain slopes {s_in:.4} / {s_out:.4}"
    );
}

#[test]
fn acceptance_12_skin_effect_lives_in_eigenvectors_not_singular_vectors() {
    let n = 50;
    let h = build_obc(&nn(PI / 2.0, 2.0, 0.5), n).unwrap();
    let eig = svd::eigendecomposition(&h).unwrap();
    let localized = eig.edge_left.iter().filter(|(w, _)| *w > 0.9).count();
    assert!(
        localized as f64 > 0.8 * n as f64,
        "only {localized} of {n} left eigenvectors are edge-localized"
    );
    let r = svd::svd(&h).unwrap();
    let mut max_w = 0.0f64;
    for j in 0..n {
        max_w = max_w.max(svd::edge_weight(r.right(j)).0);
        max_w = max_w.max(svd::edge_weight(r.left(j)).0);
    }
    assert!(max_w < 0.5, "a singular vector has edge weight {max_w}");
    println!(
        "acceptance 12 skin-effect contrast: PASS — {localized}/{n} left \
         eigenvectors above 0.9, max singular-vector edge weight {max_w:.4}"
    );
}
