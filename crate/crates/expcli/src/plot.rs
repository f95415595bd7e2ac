//! SVG plots of `loss − loss*` against iteration on a log axis.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{ExpError, Result};
use crate::runner::{read_trace_csv, sidecar_path, Metadata, TraceRow};

pub const LOG_FLOOR: f64 = 1e-16;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    /// Finite `(iter, loss − loss*)` pairs, floored at [`LOG_FLOOR`].
    pub fn from_rows(label: impl Into<String>, rows: &[TraceRow]) -> Self {
        let points = rows
            .iter()
            .filter(|r| r.loss_minus_opt.is_finite())
            .map(|r| (r.iter as f64, r.loss_minus_opt.max(LOG_FLOOR)))
            .collect();
        Self {
            label: label.into(),
            points,
        }
    }
}

/// Reads a trace CSV, labelling it from its JSON sidecar when present.
pub fn load_series(csv: &Path) -> Result<Series> {
    let rows = read_trace_csv(csv)?;
    let meta_path = sidecar_path(csv);
    let label = match fs::read_to_string(&meta_path) {
        Ok(text) => serde_json::from_str::<Metadata>(&text)?.label,
        Err(_) => csv.file_stem().map_or_else(|| "trace".into(), |s| s.to_string_lossy().into_owned()),
    };
    Ok(Series::from_rows(label, &rows))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(series: &[Series]) -> Result<String> {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        return Err(ExpError::Config("nothing to plot: no finite trace points".into()));
    }
    let x_max = all.iter().map(|p| p.0).fold(1.0, f64::max);
    let lo = all.iter().map(|p| p.1.log10()).fold(f64::INFINITY, f64::min).floor();
    let mut hi = all.iter().map(|p| p.1.log10()).fold(f64::NEG_INFINITY, f64::max).ceil();
    if hi <= lo {
        hi = lo + 1.0;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + pw * x / x_max;
    let sy = |y: f64| TOP + ph * (hi - y.log10()) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let decades = (hi - lo) as usize;
    let stride = decades.div_ceil(10).max(1);
    for k in (0..=decades).step_by(stride) {
        let e = lo + k as f64;
        let y = sy(10f64.powf(e));
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    for k in 0..=4 {
        let x = x_max * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(x),
            TOP + ph + 18.0,
            x.round()
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">loss − loss*</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !s.points.is_empty() {
            let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(traces: &[impl AsRef<Path>], out: &Path) -> Result<()> {
    let series = traces
        .iter()
        .map(|p| load_series(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let svg = render_svg(&series)?;
    fs::write(out, svg).map_err(|e| ExpError::io(out, e))
}
