//! Minimal SVG line and scatter panels. Coordinates are printed with two
//! decimals so output is byte-stable.

use std::fmt::Write;

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 52.0;
const MARGIN_R: f64 = 12.0;
const MARGIN_T: f64 = 26.0;
const MARGIN_B: f64 = 40.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Scatter,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            style: Style::Line,
        }
    }

    pub fn scatter(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            style: Style::Scatter,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn draw_panel(out: &mut String, panel: &Panel, ox: f64, oy: f64) {
    let pts = || panel.series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = bounds(pts().map(|p| p.0));
    let (y0, y1) = bounds(pts().map(|p| p.1));
    let (pw, ph) = (PANEL_W - MARGIN_L - MARGIN_R, PANEL_H - MARGIN_T - MARGIN_B);
    let sx = |x: f64| ox + MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| oy + MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let _ = writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#444"/>"##,
        ox + MARGIN_L,
        oy + MARGIN_T
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
        ox + PANEL_W / 2.0,
        oy + 17.0,
        escape(&panel.title)
    );
    for (v, anchor_y) in [(y0, oy + MARGIN_T + ph), (y1, oy + MARGIN_T + 9.0)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{anchor_y:.2}" font-size="10" text-anchor="end">{v:.3}</text>"#,
            ox + MARGIN_L - 4.0
        );
    }
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        let x = if anchor == "start" { ox + MARGIN_L } else { ox + MARGIN_L + pw };
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="{anchor}">{v:.3}</text>"#,
            oy + MARGIN_T + ph + 13.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
        ox + MARGIN_L + pw / 2.0,
        oy + PANEL_H - 8.0,
        escape(&panel.x_label)
    );
    let (lx, ly) = (ox + 12.0, oy + MARGIN_T + ph / 2.0);
    let _ = writeln!(
        out,
        r#"<text x="{lx:.2}" y="{ly:.2}" font-size="11" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
        escape(&panel.y_label)
    );

    for (i, s) in panel.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let finite = s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite());
        match s.style {
            Style::Line => {
                let path: Vec<String> = finite.map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
                    path.join(" ")
                );
            }
            Style::Scatter => {
                for &(x, y) in finite {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="{color}" fill-opacity="0.6"/>"#,
                        sx(x),
                        sy(y)
                    );
                }
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="{color}" text-anchor="end">{}</text>"#,
            ox + MARGIN_L + pw - 4.0,
            oy + MARGIN_T + 12.0 + 12.0 * i as f64,
            escape(&s.label)
        );
    }
}

/// Lays panels out row-major, `cols` per row.
pub fn render(panels: &[Panel], cols: usize) -> String {
    let cols = cols.max(1);
    let rows = panels.len().div_ceil(cols).max(1);
    let (w, h) = (PANEL_W * cols.min(panels.len().max(1)) as f64, PANEL_H * rows as f64);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, panel) in panels.iter().enumerate() {
        let (r, c) = (i / cols, i % cols);
        draw_panel(&mut out, panel, c as f64 * PANEL_W, r as f64 * PANEL_H);
    }
    out.push_str("</svg>\n");
    out
}
