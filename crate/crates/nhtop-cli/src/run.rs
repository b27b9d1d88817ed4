//! Analysis pipelines: each requested kind turns the validated config into
//! CSV/JSON/SVG artifacts in the output directory, and a manifest listing
//! everything written is emitted last.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use ndarray::Array2;
use nhtop::bloch::{self, WindingClass};
use nhtop::disorder::{self, DisorderKind, DisorderSpec};
use nhtop::gssh;
use nhtop::model::{build_obc, coefficients, LatticeParams};
use nhtop::response;
use nhtop::svd::{self, SpectralLabel};
use nhtop::{C64, Error, Tolerances};
use serde::Serialize;
use serde_json::json;

use crate::config::{AnalysisKind, Formats, Resolved};
use crate::csvio::{self, Cell};
use crate::plot::{self, Chart, Series, Style};
use crate::CliError;

/// Artifact sink: writes files in the requested formats and remembers their
/// names for the manifest.
struct Out<'a> {
    dir: &'a Path,
    formats: Formats,
    files: Vec<String>,
}

impl<'a> Out<'a> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), CliError> {
        if self.formats.csv {
            self.write(name, csvio::render(header, rows).as_bytes())?;
        }
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        if self.formats.json {
            let mut text = serde_json::to_string_pretty(value)
                .map_err(|e| CliError::Numerical(format!("cannot serialize {name}: {e}")))?;
            text.push('\n');
            self.write(name, text.as_bytes())?;
        }
        Ok(())
    }

    fn svg(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        if self.formats.svg {
            self.write(name, content.as_bytes())?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    seed: u64,
    parameters: serde_json::Value,
    tolerances: &'a Tolerances,
    files: Vec<String>,
    /// Wall-clock seconds since the Unix epoch; the only key that differs
    /// between reruns of an identical config.
    timestamp: u64,
}

/// Execute every requested analysis and write the manifest.
pub fn run(r: &Resolved) -> Result<(), CliError> {
    std::fs::create_dir_all(&r.out_dir).map_err(|e| {
        CliError::Validation(format!("cannot create {}: {e}", r.out_dir.display()))
    })?;
    let mut out = Out {
        dir: &r.out_dir,
        formats: r.formats,
        files: Vec::new(),
    };
    for &kind in &r.kinds {
        match kind {
            AnalysisKind::Spectrum => spectrum(r, &mut out)?,
            AnalysisKind::Winding => winding(r, &mut out)?,
            AnalysisKind::Svd => svd_pipeline(r, &mut out)?,
            AnalysisKind::Gssh => gssh_pipeline(r, &mut out)?,
            AnalysisKind::Response => response_pipeline(r, &mut out)?,
            AnalysisKind::Disorder => disorder_pipeline(r, &mut out)?,
            AnalysisKind::Sweep => sweep_pipeline(r, &mut out)?,
        }
    }
    let mut files = out.files.clone();
    files.push("manifest.json".to_string());
    files.sort();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: r.seed,
        parameters: serde_json::to_value(&r.echo)
            .map_err(|e| CliError::Numerical(format!("cannot echo the config: {e}")))?,
        tolerances: &r.tol,
        files,
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Numerical(format!("cannot serialize the manifest: {e}")))?;
    text.push('\n');
    out.write("manifest.json", text.as_bytes())?;
    for name in &out.files {
        println!("wrote {}", r.out_dir.join(name).display());
    }
    Ok(())
}

fn spectrum(r: &Resolved, out: &mut Out) -> Result<(), CliError> {
    let c = coefficients(&r.params);
    let s = bloch::sample(&c, r.n_k, &r.tol);
    let rows: Vec<Vec<Cell>> = (0..s.n_k())
        .map(|i| {
            vec![
                Cell::Float(s.k[i]),
                Cell::Float(s.h[i].re),
                Cell::Float(s.h[i].im),
                Cell::Float(s.sigma[i]),
                if s.phase_reliable[i] {
                    Cell::Float(s.phi[i])
                } else {
                    Cell::Blank
                },
            ]
        })
        .collect();
    out.csv("spectrum.csv", &["k", "re_h", "im_h", "sigma", "phi"], &rows)?;
    let curve: Vec<(f64, f64)> = s.h.iter().map(|z| (z.re, z.im)).collect();
    out.svg(
        "spectrum.svg",
        &plot::render_chart(&Chart {
            title: "Bloch band in the complex plane".into(),
            x_label: "Re H(k)".into(),
            y_label: "Im H(k)".into(),
            series: vec![
                Series {
                    name: "band".into(),
                    style: Style::Line,
                    points: curve,
                },
                Series {
                    name: "origin".into(),
                    style: Style::Cross,
                    points: vec![(0.0, 0.0)],
                },
            ],
        }),
    )?;
    println!(
        "spectrum: {} momentum samples, min |H| = {:.6}, max |H| = {:.6}",
        s.n_k(),
        s.min_sigma(),
        s.max_sigma()
    );
    Ok(())
}

fn winding(r: &Resolved, out: &mut Out) -> Result<(), CliError> {
    let c = coefficients(&r.params);
    let report = bloch::classify_adaptive(&c, r.n_k, 3, &r.tol)?;
    out.json(
        "topology.json",
        &serde_json::to_value(&report)
            .map_err(|e| CliError::Numerical(format!("cannot serialize topology: {e}")))?,
    )?;
    println!(
        "winding: {:?}, point gap open = {}, nh gap = {:?}",
        report.winding, report.point_gap_open, report.nh_gap
    );
    Ok(())
}

fn svd_pipeline(r: &Resolved, out: &mut Out) -> Result<(), CliError> {
    let c = coefficients(&r.params);
    let h = build_obc(&c, r.n)?;
    let decomp = svd::svd(&h)?;
    let topo = bloch::classify_adaptive(&c, r.n_k, 3, &r.tol)?;
    let zsm = match (topo.winding.as_integer(), topo.nh_gap) {
        (Some(_), Some(gap)) if gap > 0.0 => Some(svd::detect_zsm(&decomp, gap)?),
        _ => None,
    };
    let zsm_count = zsm.as_ref().map_or(0, |z| z.count);
    let labels = svd::momentum_label(&decomp, zsm_count);
    let rows: Vec<Vec<Cell>> = labels
        .entries
        .iter()
        .enumerate()
        .map(|(j, (label, sigma))| {
            let (tag, k) = match label {
                SpectralLabel::Bulk { k } => (Cell::from("bulk"), Cell::Float(*k)),
                SpectralLabel::EdgeMode => (Cell::from("edge"), Cell::Blank),
            };
            let (weight, _) = svd::edge_weight(decomp.right(j));
            vec![
                Cell::from(j),
                Cell::Float(*sigma),
                tag,
                k,
                Cell::Float(svd::ipr(decomp.right(j))),
                Cell::Float(weight),
            ]
        })
        .collect();
    out.csv(
        "svd.csv",
        &["index", "sigma", "label", "k", "ipr", "edge_weight"],
        &rows,
    )?;
    if let Some(z) = &zsm {
        out.json(
            "zsm.json",
            &json!({
                "n": r.n,
                "winding": topo.winding,
                "nh_gap": topo.nh_gap,
                "report": z,
            }),
        )?;
        for mode in &z.modes {
            let right = decomp.right(mode.index);
            let left = decomp.left(mode.index);
            let profile: Vec<Vec<Cell>> = (0..r.n)
                .map(|m| {
                    vec![
                        Cell::from(m + 1),
                        Cell::Float(right[m].norm()),
                        Cell::Float(left[m].norm()),
                    ]
                })
                .collect();
            out.csv(
                &format!("zsm_mode_{}.csv", mode.index),
                &["site", "abs_right", "abs_left"],
                &profile,
            )?;
        }
    }
    // Band overlay: dense symbol curve plus the labeled finite-size values.
    let s = bloch::sample(&c, r.n_k, &r.tol);
    let mut series = vec![Series {
        name: "symbol".into(),
        style: Style::Line,
        points: s.k.iter().zip(&s.sigma).map(|(&k, &v)| (k, v)).collect(),
    }];
    let bulk: Vec<(f64, f64)> = labels
        .entries
        .iter()
        .filter_map(|(label, sigma)| match label {
            SpectralLabel::Bulk { k } => Some((*k, *sigma)),
            SpectralLabel::EdgeMode => None,
        })
        .collect();
    series.push(Series {
        name: "chain".into(),
        style: Style::Dots,
        points: bulk,
    });
    if zsm_count > 0 {
        series.push(Series {
            name: "zero modes".into(),
            style: Style::Cross,
            points: decomp.sigma[..zsm_count].iter().map(|&v| (0.0, v)).collect(),
        });
    }
    out.svg(
        "bands.svg",
        &plot::render_chart(&Chart {
            title: "Singular values over momentum".into(),
            x_label: "k".into(),
            y_label: "sigma".into(),
            series,
        }),
    )?;
    if let Some(z) = &zsm {
        let mut series = Vec::new();
        for mode in &z.modes {
            for (tag, vec) in [("right", decomp.right(mode.index)), ("left", decomp.left(mode.index))] {
                series.push(Series {
                    name: format!("mode {} {tag}", mode.index),
                    style: Style::Line,
                    points: vec
                        .iter()
                        .enumerate()
                        .map(|(m, z)| ((m + 1) as f64, z.norm().max(1e-300).log10()))
                        .collect(),
                });
            }
        }
        out.svg(
            "zsm_profile.svg",
            &plot::render_chart(&Chart {
                title: "Zero-mode profiles".into(),
                x_label: "site".into(),
                y_label: "log10 |amplitude|".into(),
                series,
            }),
        )?;
    }
    println!(
        "svd: n = {}, min sigma = {:.6e}, zero modes = {}",
        r.n, decomp.sigma[0], zsm_count
    );
    Ok(())
}

fn gssh_pipeline(r: &Resolved, out: &mut Out) -> Result<(), CliError> {
    let c = coefficients(&r.params);
    let s = bloch::sample(&c, r.n_k, &r.tol);
    let bands = gssh::gssh_bands(&s);
    let rows: Vec<Vec<Cell>> = (0..bands.k.len())
        .map(|i| {
            vec![
                Cell::Float(bands.k[i]),
                Cell::Float(bands.e_minus[i]),
                Cell::Float(bands.e_plus[i]),
            ]
        })
        .collect();
    out.csv("gssh.csv", &["k", "e_minus", "e_plus"], &rows)?;
    let zak = match gssh::zak_invariant(&s, &r.tol) {
        Ok(z) => Some(z),
        Err(Error::DegenerateSpectrum) | Err(Error::OriginOnCurve(_)) => None,
        Err(e) => return Err(e.into()),
    };
    out.json(
        "gssh.json",
        &json!({
            "n_k": s.n_k(),
            "zak": zak,
        }),
    )?;
    out.svg(
        "gssh_bands.svg",
        &plot::render_chart(&Chart {
            title: "Doubled-chain bands".into(),
            x_label: "k".into(),
            y_label: "energy".into(),
            series: vec![
                Series {
                    name: "e_minus".into(),
                    style: Style::Line,
                    points: bands.k.iter().zip(&bands.e_minus).map(|(&k, &v)| (k, v)).collect(),
                },
                Series {
                    name: "e_plus".into(),
                    style: Style::Line,
                    points: bands.k.iter().zip(&bands.e_plus).map(|(&k, &v)| (k, v)).collect(),
                },
            ],
        }),
    )?;
    match zak {
        Some(z) => println!("gssh: zak invariant = {z}"),
        None => println!("gssh: zak invariant undefined (gapless doubled bands)"),
    }
    Ok(())
}

fn matrix_rows(m: &Array2<C64>) -> Vec<Vec<Cell>> {
    let (nr, nc) = m.dim();
    let mut rows = Vec::with_capacity(nr * nc);
    for i in 0..nr {
        for j in 0..nc {
            let z = m[[i, j]];
            rows.push(vec![
                Cell::from(i + 1),
                Cell::from(j + 1),
                Cell::Float(z.re),
                Cell::Float(z.im),
                Cell::Float(z.norm()),
            ]);
        }
    }
    rows
}

fn response_pipeline(r: &Resolved, out: &mut Out) -> Result<(), CliError> {
    let c = coefficients(&r.params);
    let h = build_obc(&c, r.n)?;
    let report = response::susceptibility(&h, r.omega, r.gamma_probe, &r.tol)?;
    let stability = response::stability(&h, &r.tol)?;
    let header = ["row", "col", "re", "im", "abs"];
    out.csv("chi.csv", &header, &matrix_rows(&report.chi))?;
    out.csv("s_matrix.csv", &header, &matrix_rows(&report.s_matrix))?;
    let decomposition = match response::zsm_decomposition(&h, r.omega, None, &r.tol) {
        Ok(d) => json!({
            "terms": d.terms,
            "delta": d.delta,
            "residual": d.residual,
        }),
        Err(Error::DegenerateSpectrum) | Err(Error::AmbiguousSeparation { .. }) => {
            serde_json::Value::Null
        }
        Err(e) => return Err(e.into()),
    };
    out.json(
        "response.json",
        &json!({
            "n": r.n,
            "omega": report.omega,
            "gamma_probe": report.gamma_probe,
            "forward_gain": report.forward_gain,
            "reverse_gain": report.reverse_gain,
            "nonreciprocity": report.nonreciprocity,
            "stable": report.stable,
            "max_im_eigenvalue": report.max_im_eigenvalue,
            "inversion_residual": report.inversion_residual,
            "stability": stability,
            "zsm_decomposition": decomposition,
        }),
    )?;
    for &site in &r.drive_sites {
        let mut drive = vec![C64::new(0.0, 0.0); r.n];
        drive[site - 1] = C64::new(1.0, 0.0);
        let field = response::steady_state(&report, &drive)?;
        let rows: Vec<Vec<Cell>> = field
            .iter()
            .enumerate()
            .map(|(m, z)| {
                vec![
                    Cell::from(m + 1),
                    Cell::Float(z.re),
                    Cell::Float(z.im),
                    Cell::Float(z.norm()),
                ]
            })
            .collect();
        out.csv(
            &format!("steady_state_site_{site}.csv"),
            &["site", "re", "im", "abs"],
            &rows,
        )?;
    }
    let cells: Vec<(f64, f64, f64)> = {
        let (nr, nc) = report.chi.dim();
        let mut cells = Vec::with_capacity(nr * nc);
        for i in 0..nr {
            for j in 0..nc {
                cells.push(((j + 1) as f64, (i + 1) as f64, report.chi[[i, j]].norm()));
            }
        }
        cells
    };
    out.svg(
        "chi.svg",
        &plot::render_density("Response magnitude", "drive site", "readout site", &cells),
    )?;
    println!(
        "response: forward gain = {:.6e}, reverse gain = {:.6e}, stable = {}",
        report.forward_gain, report.reverse_gain, report.stable
    );
    Ok(())
}

fn disorder_pipeline(r: &Resolved, out: &mut Out) -> Result<(), CliError> {
    let section = r.disorder.as_ref().ok_or_else(|| {
        CliError::Validation(
            "analysis.disorder (with w and realizations) is required for kind `disorder`".into(),
        )
    })?;
    let spec = DisorderSpec::new(
        DisorderKind::ImaginaryOnsite,
        section.w,
        section.realizations,
        r.seed,
    )?;
    let stats = disorder::ensemble(&r.params, r.n, &spec, &r.tol)?;
    let criterion = disorder::robustness_criterion(&r.params, section.w, &r.tol)?;
    let rows: Vec<Vec<Cell>> = stats
        .sv_histogram
        .rows()
        .map(|(k, sigma, count)| {
            vec![Cell::Float(k), Cell::Float(sigma), Cell::Int(count as i64)]
        })
        .collect();
    out.csv(
        "histogram.csv",
        &["k_bin_center", "sigma_bin_center", "count"],
        &rows,
    )?;
    out.json(
        "disorder.json",
        &json!({
            "n": r.n,
            "w": stats.w,
            "realizations": stats.realizations,
            "seed": spec.seed,
            "clean_winding": stats.clean_winding,
            "clean_gap": stats.clean_gap,
            "clean_zsm_count": stats.clean_zsm_count,
            "clean_bulk_ipr": stats.clean_bulk_ipr,
            "zsm_survival": stats.zsm_survival,
            "max_sigma_shift": stats.max_sigma_shift,
            "mean_bulk_ipr": stats.mean_bulk_ipr,
            "min_sigma_distribution": stats.min_sigma_distribution,
            "gap_exceeds_disorder": criterion,
        }),
    )?;
    let cells: Vec<(f64, f64, f64)> = stats
        .sv_histogram
        .rows()
        .map(|(k, sigma, count)| (k, sigma, count as f64))
        .collect();
    out.svg(
        "histogram.svg",
        &plot::render_density(
            "Disorder-averaged singular-value density",
            "k",
            "sigma",
            &cells,
        ),
    )?;
    println!(
        "disorder: w = {}, realizations = {}, zero-mode survival = {:.3}, max shift = {:.4}",
        stats.w, stats.realizations, stats.zsm_survival, stats.max_sigma_shift
    );
    Ok(())
}

fn winding_cell(w: &WindingClass) -> Cell {
    match w.as_integer() {
        Some(v) => Cell::Int(v),
        None => Cell::Blank,
    }
}

fn sweep_pipeline(r: &Resolved, out: &mut Out) -> Result<(), CliError> {
    let section = r.sweep.as_ref().ok_or_else(|| {
        CliError::Validation(
            "analysis.sweep (with parameter and values) is required for kind `sweep`".into(),
        )
    })?;
    let (rows_csv, rows_json): (Vec<Vec<Cell>>, serde_json::Value) =
        match section.parameter.as_str() {
            "delta" => {
                let rows = response::detuning_sweep(&r.params, &section.values, &r.n_list, &r.tol)?;
                let csv = rows
                    .iter()
                    .map(|row| {
                        vec![
                            Cell::from("delta"),
                            Cell::Float(row.delta),
                            winding_cell(&row.winding),
                            Cell::from(row.nh_gap),
                            match row.zsm_count {
                                Some(c) => Cell::from(c),
                                None => Cell::Blank,
                            },
                            Cell::from(row.gain_slope),
                        ]
                    })
                    .collect();
                (
                    csv,
                    serde_json::to_value(&rows).map_err(|e| {
                        CliError::Numerical(format!("cannot serialize the sweep: {e}"))
                    })?,
                )
            }
            "cooperativity" => {
                let mut csv = Vec::new();
                let mut entries = Vec::new();
                let last = r.params.cooperativity.len() - 1;
                for &value in &section.values {
                    let mut coop = r.params.cooperativity.clone();
                    let mut lambda = r.params.lambda.clone();
                    coop[last] = value;
                    if section.tie_lambda {
                        lambda[last] = C64::new(value, 0.0);
                    }
                    let p = LatticeParams::new(
                        lambda,
                        coop,
                        r.params.theta.clone(),
                        r.params.delta,
                        r.params.gamma_eff,
                    )?;
                    let c = coefficients(&p);
                    let topo = bloch::classify_adaptive(&c, r.n_k, 3, &r.tol)?;
                    let zsm_count = match (topo.winding.as_integer(), topo.nh_gap) {
                        (Some(_), Some(gap)) if gap > 0.0 => {
                            let h = build_obc(&c, r.n)?;
                            match svd::detect_zsm(&svd::svd(&h)?, gap) {
                                Ok(z) => Some(z.count),
                                Err(Error::AmbiguousSeparation { .. }) => None,
                                Err(e) => return Err(e.into()),
                            }
                        }
                        _ => None,
                    };
                    csv.push(vec![
                        Cell::from("cooperativity"),
                        Cell::Float(value),
                        winding_cell(&topo.winding),
                        Cell::from(topo.nh_gap),
                        match zsm_count {
                            Some(c) => Cell::from(c),
                            None => Cell::Blank,
                        },
                        Cell::Blank,
                    ]);
                    entries.push(json!({
                        "value": value,
                        "winding": topo.winding,
                        "nh_gap": topo.nh_gap,
                        "zsm_count": zsm_count,
                        "gain_slope": serde_json::Value::Null,
                    }));
                }
                (csv, serde_json::Value::Array(entries))
            }
            other => unreachable!("validated parameter {other}"),
        };
    out.csv(
        "sweep.csv",
        &[
            "parameter",
            "value",
            "winding",
            "nh_gap",
            "zsm_count",
            "gain_slope",
        ],
        &rows_csv,
    )?;
    out.json(
        "sweep.json",
        &json!({
            "parameter": section.parameter,
            "tie_lambda": section.tie_lambda,
            "rows": rows_json,
        }),
    )?;
    let mut series = Vec::new();
    let xs = &section.values;
    let col = |pick: &dyn Fn(&Vec<Cell>) -> Option<f64>| -> Vec<(f64, f64)> {
        rows_csv
            .iter()
            .zip(xs)
            .filter_map(|(row, &x)| pick(row).map(|y| (x, y)))
            .collect()
    };
    let cell_num = |c: &Cell| -> Option<f64> {
        match c {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            _ => None,
        }
    };
    for (name, index) in [("winding", 2usize), ("nh_gap", 3), ("zsm_count", 4), ("gain_slope", 5)] {
        let points = col(&|row: &Vec<Cell>| cell_num(&row[index]));
        if !points.is_empty() {
            series.push(Series {
                name: name.into(),
                style: Style::Line,
                points,
            });
        }
    }
    out.svg(
        "sweep.svg",
        &plot::render_chart(&Chart {
            title: "Parameter sweep".into(),
            x_label: section.parameter.clone(),
            y_label: "series value".into(),
            series,
        }),
    )?;
    println!(
        "sweep: {} over {} values",
        section.parameter,
        section.values.len()
    );
    Ok(())
}
