//! Self-contained SVG charts for the artifacts this tool writes.
//!
//! Two chart shapes cover everything: an x/y chart with line, dot, and
//! cross series, and a density chart (colored cells on a regular grid).
//! The `plot` subcommand re-reads the CSV artifacts and dispatches on a
//! named kind, checking that the expected columns are present.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::csvio::{self, Table};
use crate::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 74.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Dots,
    Cross,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub style: Style,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        return format!("{v:.1e}");
    }
    let mut s = format!("{v:.3}");
    while s.contains('.') && (s.ends_with('0') || s.ends_with('.')) {
        s.pop();
    }
    s
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }
    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn open_svg(title: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n\
         <text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn axes(s: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let _ = write!(
        s,
        "<rect x=\"{x0}\" y=\"{y1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>\n",
        x1 - x0,
        y0 - y1
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = frame.x_min + f * (frame.x_max - frame.x_min);
        let yv = frame.y_min + f * (frame.y_max - frame.y_min);
        let px = frame.px(xv);
        let py = frame.py(yv);
        let _ = write!(
            s,
            "<line x1=\"{px:.1}\" y1=\"{y0}\" x2=\"{px:.1}\" y2=\"{y1}\" stroke=\"#ddd\"/>\n\
             <text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            y0 + 18.0,
            tick_label(xv)
        );
        let _ = write!(
            s,
            "<line x1=\"{x0}\" y1=\"{py:.1}\" x2=\"{x1}\" y2=\"{py:.1}\" stroke=\"#ddd\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            x0 - 6.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = write!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = write!(
        s,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render an x/y chart with any mix of line, dot, and cross series.
pub fn render_chart(chart: &Chart) -> String {
    let mut s = open_svg(&chart.title);
    let all = chart.series.iter().flat_map(|r| r.points.iter().copied());
    let (x_min, x_max) = range(all.clone().map(|p| p.0));
    let (y_min, y_max) = range(
        chart
            .series
            .iter()
            .flat_map(|r| r.points.iter().map(|p| p.1)),
    );
    let frame = Frame { x_min, x_max, y_min, y_max };
    axes(&mut s, &frame, &chart.x_label, &chart.y_label);
    for (i, series) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        match series.style {
            Style::Line => {
                let mut points = String::new();
                for &(x, y) in &series.points {
                    if x.is_finite() && y.is_finite() {
                        let _ = write!(points, "{:.2},{:.2} ", frame.px(x), frame.py(y));
                    }
                }
                if !points.is_empty() {
                    let _ = write!(
                        s,
                        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
                        points.trim_end()
                    );
                }
            }
            Style::Dots => {
                for &(x, y) in &series.points {
                    if x.is_finite() && y.is_finite() {
                        let _ = write!(
                            s,
                            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                            frame.px(x),
                            frame.py(y)
                        );
                    }
                }
            }
            Style::Cross => {
                for &(x, y) in &series.points {
                    if x.is_finite() && y.is_finite() {
                        let (px, py) = (frame.px(x), frame.py(y));
                        let _ = write!(
                            s,
                            "<path d=\"M {:.2} {:.2} L {:.2} {:.2} M {:.2} {:.2} L {:.2} {:.2}\" \
                             stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
                            px - 5.0,
                            py - 5.0,
                            px + 5.0,
                            py + 5.0,
                            px - 5.0,
                            py + 5.0,
                            px + 5.0,
                            py - 5.0
                        );
                    }
                }
            }
        }
    }
    if chart.series.len() > 1 {
        let mut ly = MARGIN_TOP + 14.0;
        for (i, series) in chart.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let lx = WIDTH - MARGIN_RIGHT - 150.0;
            let _ = write!(
                s,
                "<line x1=\"{lx:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
                 <text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
                ly - 4.0,
                lx + 22.0,
                ly - 4.0,
                lx + 28.0,
                ly,
                escape(&series.name)
            );
            ly += 18.0;
        }
    }
    s.push_str("</svg>\n");
    s
}

fn colormap(f: f64) -> String {
    // Five anchor colors, dark to bright, interpolated linearly.
    const STOPS: [(f64, f64, f64); 5] = [
        (0.267, 0.005, 0.329),
        (0.229, 0.322, 0.546),
        (0.128, 0.566, 0.551),
        (0.369, 0.789, 0.383),
        (0.993, 0.906, 0.144),
    ];
    let f = f.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (f.floor() as usize).min(STOPS.len() - 2);
    let t = f - i as f64;
    let mix = |a: f64, b: f64| ((a + (b - a) * t) * 255.0).round() as u8;
    let (r0, g0, b0) = STOPS[i];
    let (r1, g1, b1) = STOPS[i + 1];
    format!("#{:02x}{:02x}{:02x}", mix(r0, r1), mix(g0, g1), mix(b0, b1))
}

fn sorted_unique(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite grid coordinates"));
    values.dedup();
    values
}

fn cell_extent(axis: &[f64]) -> f64 {
    axis.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
        .min(1.0e12)
        .max(1e-12)
}

/// Render a density chart from `(x, y, value)` cells on a regular grid.
pub fn render_density(title: &str, x_label: &str, y_label: &str, cells: &[(f64, f64, f64)]) -> String {
    let mut s = open_svg(title);
    let xs = sorted_unique(cells.iter().map(|c| c.0).collect());
    let ys = sorted_unique(cells.iter().map(|c| c.1).collect());
    if xs.is_empty() || ys.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let wx = if xs.len() > 1 { cell_extent(&xs) } else { 1.0 };
    let wy = if ys.len() > 1 { cell_extent(&ys) } else { 1.0 };
    let frame = Frame {
        x_min: xs[0] - wx / 2.0,
        x_max: xs[xs.len() - 1] + wx / 2.0,
        y_min: ys[0] - wy / 2.0,
        y_max: ys[ys.len() - 1] + wy / 2.0,
    };
    axes(&mut s, &frame, x_label, y_label);
    let v_max = cells.iter().map(|c| c.2).fold(0.0_f64, f64::max).max(1e-300);
    for &(x, y, v) in cells {
        if v <= 0.0 {
            continue;
        }
        let x0 = frame.px(x - wx / 2.0);
        let y0 = frame.py(y + wy / 2.0);
        let w = frame.px(x + wx / 2.0) - x0;
        let h = frame.py(y - wy / 2.0) - y0;
        let _ = write!(
            s,
            "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{}\"/>\n",
            colormap(v / v_max)
        );
    }
    let _ = write!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">max = {}</text>\n",
        WIDTH - MARGIN_RIGHT,
        MARGIN_TOP - 6.0,
        tick_label(v_max)
    );
    s.push_str("</svg>\n");
    s
}

/// What the `plot` subcommand can draw from CSV artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Spectrum,
    Bands,
    Profile,
    Heatmap,
    Histogram,
    Sweep,
}

impl FromStr for PlotKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "spectrum" => PlotKind::Spectrum,
            "bands" => PlotKind::Bands,
            "profile" => PlotKind::Profile,
            "heatmap" => PlotKind::Heatmap,
            "histogram" => PlotKind::Histogram,
            "sweep" => PlotKind::Sweep,
            other => {
                return Err(CliError::Validation(format!(
                    "plot kind `{other}` is not one of spectrum, bands, profile, \
                     heatmap, histogram, sweep"
                )))
            }
        })
    }
}

impl PlotKind {
    fn required_columns(self) -> &'static [&'static str] {
        match self {
            PlotKind::Spectrum => &["re_h", "im_h"],
            PlotKind::Bands => &["k", "sigma"],
            PlotKind::Profile => &["site", "abs_right", "abs_left"],
            PlotKind::Heatmap => &["row", "col", "abs"],
            PlotKind::Histogram => &["k_bin_center", "sigma_bin_center", "count"],
            PlotKind::Sweep => &["value"],
        }
    }

    fn name(self) -> &'static str {
        match self {
            PlotKind::Spectrum => "spectrum",
            PlotKind::Bands => "bands",
            PlotKind::Profile => "profile",
            PlotKind::Heatmap => "heatmap",
            PlotKind::Histogram => "histogram",
            PlotKind::Sweep => "sweep",
        }
    }
}

/// Extract `(x, y)` pairs from two columns, skipping rows where either
/// cell is blank.
fn pairs(table: &Table, xi: usize, yi: usize) -> Result<Vec<(f64, f64)>, CliError> {
    let mut out = Vec::new();
    for row in &table.rows {
        if row[xi].is_empty() || row[yi].is_empty() {
            continue;
        }
        let parse = |i: usize| -> Result<f64, CliError> {
            row[i].parse::<f64>().map_err(|_| {
                CliError::Validation(format!(
                    "column `{}` holds non-numeric value `{}`",
                    table.header[i], row[i]
                ))
            })
        };
        out.push((parse(xi)?, parse(yi)?));
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Read the input CSVs, check their schema for `kind`, and render one SVG.
pub fn plot_files(kind: PlotKind, inputs: &[std::path::PathBuf]) -> Result<String, CliError> {
    if inputs.is_empty() {
        return Err(CliError::Validation(
            "plot needs at least one input CSV".into(),
        ));
    }
    let mut tables = Vec::new();
    for path in inputs {
        let table = csvio::read(path)?;
        for col in kind.required_columns() {
            if !table.header.iter().any(|h| h == col) {
                return Err(CliError::Validation(format!(
                    "schema mismatch: missing column `{col}` for kind `{}` in {}",
                    kind.name(),
                    path.display()
                )));
            }
        }
        tables.push((stem(path), table));
    }
    match kind {
        PlotKind::Spectrum => {
            let mut series = Vec::new();
            for (name, table) in &tables {
                let points = pairs(table, table.column("re_h")?, table.column("im_h")?)?;
                series.push(Series {
                    name: name.clone(),
                    style: Style::Line,
                    points,
                });
            }
            series.push(Series {
                name: "origin".into(),
                style: Style::Cross,
                points: vec![(0.0, 0.0)],
            });
            Ok(render_chart(&Chart {
                title: "Bloch band in the complex plane".into(),
                x_label: "Re H(k)".into(),
                y_label: "Im H(k)".into(),
                series,
            }))
        }
        PlotKind::Bands => {
            let mut series = Vec::new();
            for (name, table) in &tables {
                let points = pairs(table, table.column("k")?, table.column("sigma")?)?;
                let style = if table.header.iter().any(|h| h == "label") {
                    Style::Dots
                } else {
                    Style::Line
                };
                series.push(Series {
                    name: name.clone(),
                    style,
                    points,
                });
            }
            Ok(render_chart(&Chart {
                title: "Singular values over momentum".into(),
                x_label: "k".into(),
                y_label: "sigma".into(),
                series,
            }))
        }
        PlotKind::Profile => {
            let mut series = Vec::new();
            for (name, table) in &tables {
                let site = table.column("site")?;
                for col in ["abs_right", "abs_left"] {
                    let points = pairs(table, site, table.column(col)?)?
                        .into_iter()
                        .map(|(x, y)| (x, (y.max(1e-300)).log10()))
                        .collect();
                    series.push(Series {
                        name: format!("{name}:{col}"),
                        style: Style::Line,
                        points,
                    });
                }
            }
            Ok(render_chart(&Chart {
                title: "Mode profile".into(),
                x_label: "site".into(),
                y_label: "log10 |amplitude|".into(),
                series,
            }))
        }
        PlotKind::Heatmap => {
            let (_, table) = &tables[0];
            let (ri, ci, vi) = (
                table.column("row")?,
                table.column("col")?,
                table.column("abs")?,
            );
            let mut cells = Vec::new();
            for row in &table.rows {
                if row[ri].is_empty() || row[ci].is_empty() || row[vi].is_empty() {
                    continue;
                }
                let parse = |i: usize| {
                    row[i].parse::<f64>().map_err(|_| {
                        CliError::Validation(format!(
                            "column `{}` holds non-numeric value `{}`",
                            table.header[i], row[i]
                        ))
                    })
                };
                cells.push((parse(ci)?, parse(ri)?, parse(vi)?));
            }
            Ok(render_density(
                "Response magnitude",
                "drive site",
                "readout site",
                &cells,
            ))
        }
        PlotKind::Histogram => {
            let (_, table) = &tables[0];
            let (ki, si, ni) = (
                table.column("k_bin_center")?,
                table.column("sigma_bin_center")?,
                table.column("count")?,
            );
            let mut cells = Vec::new();
            for row in &table.rows {
                let parse = |i: usize| {
                    row[i].parse::<f64>().map_err(|_| {
                        CliError::Validation(format!(
                            "column `{}` holds non-numeric value `{}`",
                            table.header[i], row[i]
                        ))
                    })
                };
                cells.push((parse(ki)?, parse(si)?, parse(ni)?));
            }
            Ok(render_density(
                "Disorder-averaged singular-value density",
                "k",
                "sigma",
                &cells,
            ))
        }
        PlotKind::Sweep => {
            let (_, table) = &tables[0];
            let value = table.column("value")?;
            let mut series = Vec::new();
            for col in ["winding", "nh_gap", "zsm_count", "gain_slope"] {
                if let Some(i) = table.header.iter().position(|h| h == col) {
                    let points = pairs(table, value, i)?;
                    if !points.is_empty() {
                        series.push(Series {
                            name: col.to_string(),
                            style: Style::Line,
                            points,
                        });
                    }
                }
            }
            if series.is_empty() {
                return Err(CliError::Validation(
                    "schema mismatch: no plottable series (winding, nh_gap, \
                     zsm_count, gain_slope) for kind `sweep`"
                        .into(),
                ));
            }
            Ok(render_chart(&Chart {
                title: "Parameter sweep".into(),
                x_label: "parameter value".into(),
                y_label: "series value".into(),
                series,
            }))
        }
    }
}
