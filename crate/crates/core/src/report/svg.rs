//! Standalone SVG 1.1 line charts.

use std::fmt::Write as _;
use std::path::Path;

use super::{CurveSeries, ReportError};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const Y_TICKS: usize = 5;
const MAX_X_TICKS: usize = 10;

// Tableau 10
const PALETTE: [&str; 10] =
    ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"];

#[derive(Clone, Debug, PartialEq)]
pub struct AxesConfig {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Fixed y range; fitted to the data when absent.
    pub y_range: Option<(f64, f64)>,
}

impl AxesConfig {
    /// Round on the x axis, `quantity` on the y axis.
    pub fn rounds(title: impl Into<String>, quantity: impl Into<String>) -> Self {
        Self { title: title.into(), x_label: "round".into(), y_label: quantity.into(), y_range: None }
    }

    pub fn with_y_range(mut self, lo: f64, hi: f64) -> Self {
        self.y_range = Some((lo, hi));
        self
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn frame(series: &[CurveSeries], axes: &AxesConfig) -> Frame {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0 as f64));
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        (x0, x1) = (x0 - 1.0, x1 + 1.0);
    }
    let (mut y0, mut y1) = axes.y_range.unwrap_or_else(|| {
        let ys = series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1).chain(s.band.iter().flatten().flat_map(|&(lo, hi)| [lo, hi])));
        ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)))
    });
    if !y0.is_finite() || !y1.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if y1 <= y0 {
        let pad = y0.abs().max(1.0) * 0.05;
        (y0, y1) = (y0 - pad, y1 + pad);
    }
    Frame { x0, x1, y0, y1 }
}

/// Renders one polyline per series with an optional min/max band and a
/// legend of series labels.
pub fn render_svg(series: &[CurveSeries], axes: &AxesConfig) -> Result<String, ReportError> {
    if series.is_empty() {
        return Err(ReportError::Empty("no series to plot"));
    }
    let f = frame(series, axes);
    let mut s = String::new();
    let w = &mut s;
    let plot_right = WIDTH - RIGHT;
    let plot_bottom = HEIGHT - BOTTOM;

    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(w, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        w,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (LEFT + plot_right) / 2.0,
        escape(&axes.title)
    )
    .unwrap();

    writeln!(w, r#"<g class="axes" stroke="black" fill="none">"#).unwrap();
    writeln!(w, r#"<line x1="{LEFT}" y1="{plot_bottom}" x2="{plot_right}" y2="{plot_bottom}"/>"#).unwrap();
    writeln!(w, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{plot_bottom}"/>"#).unwrap();
    writeln!(w, "</g>").unwrap();

    writeln!(w, r#"<g class="ticks" text-anchor="middle">"#).unwrap();
    let span = (f.x1 - f.x0).round().max(1.0) as usize;
    let step = span.div_ceil(MAX_X_TICKS).max(1);
    let mut x = f.x0.ceil() as i64;
    while (x as f64) <= f.x1 {
        let px = f.px(x as f64);
        writeln!(
            w,
            r#"<line x1="{px:.2}" y1="{plot_bottom}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#,
            plot_bottom + 5.0
        )
        .unwrap();
        writeln!(w, r#"<text x="{px:.2}" y="{:.2}">{x}</text>"#, plot_bottom + 18.0).unwrap();
        x += step as i64;
    }
    for i in 0..=Y_TICKS {
        let y = f.y0 + (f.y1 - f.y0) * i as f64 / Y_TICKS as f64;
        let py = f.py(y);
        writeln!(w, r##"<line x1="{LEFT}" y1="{py:.2}" x2="{plot_right}" y2="{py:.2}" stroke="#e0e0e0"/>"##).unwrap();
        writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, py + 4.0, fmt_tick(y))
            .unwrap();
    }
    writeln!(w, "</g>").unwrap();
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + plot_right) / 2.0,
        HEIGHT - 18.0,
        escape(&axes.x_label)
    )
    .unwrap();
    let mid_y = (TOP + plot_bottom) / 2.0;
    writeln!(
        w,
        r#"<text x="18" y="{mid_y:.2}" text-anchor="middle" transform="rotate(-90 18 {mid_y:.2})">{}</text>"#,
        escape(&axes.y_label)
    )
    .unwrap();

    for (i, series) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if let Some(band) = &series.band {
            let upper = series.points.iter().zip(band).map(|(p, b)| (p.0, b.1));
            let lower = series.points.iter().zip(band).rev().map(|(p, b)| (p.0, b.0));
            let pts: Vec<String> =
                upper.chain(lower).map(|(r, y)| format!("{:.2},{:.2}", f.px(r as f64), f.py(y))).collect();
            writeln!(
                w,
                r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
                pts.join(" ")
            )
            .unwrap();
        }
        let pts: Vec<String> =
            series.points.iter().map(|&(r, y)| format!("{:.2},{:.2}", f.px(r as f64), f.py(y))).collect();
        writeln!(w, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" ")).unwrap();
    }

    writeln!(w, r#"<g class="legend">"#).unwrap();
    for (i, series) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = TOP + 10.0 + 20.0 * i as f64;
        let x = plot_right + 16.0;
        writeln!(w, r#"<rect x="{x}" y="{:.2}" width="14" height="4" fill="{color}"/>"#, y - 2.0).unwrap();
        writeln!(w, r#"<text x="{}" y="{:.2}">{}</text>"#, x + 20.0, y + 4.0, escape(&series.label)).unwrap();
    }
    writeln!(w, "</g>").unwrap();
    writeln!(w, "</svg>").unwrap();
    Ok(s)
}

pub fn emit_curves_svg(series: &[CurveSeries], axes: &AxesConfig, path: &Path) -> Result<(), ReportError> {
    let svg = render_svg(series, axes)?;
    std::fs::write(path, svg).map_err(|e| ReportError::io(path, e))
}
