//! Minimal line charts: polylines, an optional shaded band per series, axes
//! with tick labels, and a legend. Output is a pure function of the input.

use std::collections::HashSet;
use std::fmt::Write;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SvgError {
    #[error("nothing to plot")]
    Empty,
    #[error("duplicate series label {0:?}")]
    DuplicateLabel(String),
    #[error("series {0:?} has mismatched or empty columns")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub band: Option<Band>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of<'a>(values: impl Iterator<Item = &'a f64>) -> Range {
        let (lo, hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        if !lo.is_finite() {
            return Range { lo: -1.0, hi: 1.0 };
        }
        if hi > lo {
            return Range { lo, hi };
        }
        // Degenerate range: pad symmetrically so a constant sits mid-axis.
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        Range {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn scale(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn check(chart: &Chart) -> Result<(), SvgError> {
    if chart.series.is_empty() {
        return Err(SvgError::Empty);
    }
    let mut seen = HashSet::new();
    for s in &chart.series {
        if !seen.insert(s.label.as_str()) {
            return Err(SvgError::DuplicateLabel(s.label.clone()));
        }
        let n = s.x.len();
        let band_ok = s
            .band
            .as_ref()
            .is_none_or(|b| b.lower.len() == n && b.upper.len() == n);
        if n == 0 || s.y.len() != n || !band_ok {
            return Err(SvgError::Shape(s.label.clone()));
        }
    }
    Ok(())
}

pub fn render_svg(chart: &Chart) -> Result<String, SvgError> {
    check(chart)?;
    let xr = Range::of(chart.series.iter().flat_map(|s| s.x.iter()));
    let yr = Range::of(chart.series.iter().flat_map(|s| {
        let band = s.band.iter().flat_map(|b| b.lower.iter().chain(&b.upper));
        s.y.iter().chain(band)
    }));
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let px = |v: f64| xr.scale(v, x0, x1);
    let py = |v: f64| yr.scale(v, y0, y1);

    let mut out = String::new();
    let w = &mut out;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        w,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (x0 + x1) / 2.0,
        escape(&chart.title)
    )
    .unwrap();

    // Axes and ticks.
    writeln!(
        w,
        r#"<g id="axes" stroke="black" fill="none"><line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/><line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/></g>"#
    )
    .unwrap();
    for k in 0..=TICKS {
        let f = k as f64 / TICKS as f64;
        let xv = xr.lo + f * (xr.hi - xr.lo);
        let yv = yr.lo + f * (yr.hi - yr.lo);
        let (tx, ty) = (px(xv), py(yv));
        writeln!(
            w,
            r#"<line x1="{tx:.2}" y1="{y0:.2}" x2="{tx:.2}" y2="{:.2}" stroke="black"/><text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            tick_label(xv)
        )
        .unwrap();
        writeln!(
            w,
            r#"<line x1="{:.2}" y1="{ty:.2}" x2="{x0:.2}" y2="{ty:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            ty + 4.0,
            tick_label(yv)
        )
        .unwrap();
    }
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(&chart.x_label)
    )
    .unwrap();
    writeln!(
        w,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(&chart.y_label)
    )
    .unwrap();

    // Bands first so lines stay on top.
    for (k, s) in chart.series.iter().enumerate() {
        if let Some(b) = &s.band {
            let color = PALETTE[k % PALETTE.len()];
            let upper = s.x.iter().zip(&b.upper).map(|(x, y)| (px(*x), py(*y)));
            let lower = s.x.iter().zip(&b.lower).rev().map(|(x, y)| (px(*x), py(*y)));
            writeln!(
                w,
                r#"<polygon class="band" fill="{color}" fill-opacity="0.2" stroke="none" points="{}"/>"#,
                points(upper.chain(lower))
            )
            .unwrap();
        }
    }
    for (k, s) in chart.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        writeln!(
            w,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points(s.x.iter().zip(&s.y).map(|(x, y)| (px(*x), py(*y))))
        )
        .unwrap();
    }

    // Legend.
    for (k, s) in chart.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = x1 + 15.0;
        writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn points(it: impl Iterator<Item = (f64, f64)>) -> String {
    it.map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}
