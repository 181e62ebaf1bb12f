//! Minimal SVG output: polylines and bars only.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesKind {
    Line,
    Bars,
    /// Star-shaped markers drawn as short polylines.
    Markers,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub kind: SeriesKind,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: &str, kind: SeriesKind, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.to_string(),
            kind,
            points,
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const M: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#222222"];

/// Render series into a standalone SVG document.
pub fn render_svg(series: &[Series], title: &str) -> Result<String> {
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if pts.is_empty() {
        return Err(Error::InvalidParameter("nothing to plot".into()));
    }
    if pts.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::NonFinite("plot coordinates".into()));
    }
    let bars = series
        .iter()
        .filter(|s| s.kind == SeriesKind::Bars)
        .count()
        .max(1);
    let (mut x0, mut x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.0), b.max(p.0))
    });
    let (mut y0, mut y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.1), b.max(p.1))
    });
    if series.iter().any(|s| s.kind == SeriesKind::Bars) {
        y0 = y0.min(0.0);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (x1 - x0);
    let (x0, x1) = (x0 - pad, x1 + pad);
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<polyline points="{M},{} {M},{} {},{}" fill="none" stroke="black"/>"#,
        M,
        H - M,
        W - M,
        H - M
    );
    let _ = writeln!(
        out,
        r#"<text x="{M}" y="24" font-size="14">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{M}" y="{}" font-size="10">x: [{x0:.4}, {x1:.4}]  y: [{y0:.4}, {y1:.4}]</text>"#,
        H - 12.0
    );

    let min_gap = {
        let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.windows(2).map(|w| w[1] - w[0]).fold(x1 - x0, f64::min)
    };
    let bar_w = 0.8 * min_gap / (x1 - x0) * (W - 2.0 * M) / bars as f64;
    let mut bar_index = 0;
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        match s.kind {
            SeriesKind::Line => {
                let path: Vec<String> = s
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                if s.points.len() == 1 {
                    let (x, y) = (sx(s.points[0].0), sy(s.points[0].1));
                    marker(&mut out, x, y, color);
                } else {
                    let _ = writeln!(
                        out,
                        r#"<polyline points="{}" fill="none" stroke="{color}"/>"#,
                        path.join(" ")
                    );
                }
            }
            SeriesKind::Bars => {
                for &(x, y) in &s.points {
                    let left = sx(x) - 0.5 * bar_w * bars as f64 + bar_w * bar_index as f64;
                    let (top, base) = (sy(y.max(0.0)), sy(y.min(0.0)));
                    let _ = writeln!(
                        out,
                        r#"<rect x="{left:.2}" y="{top:.2}" width="{bar_w:.2}" height="{:.2}" fill="{color}" fill-opacity="0.7"/>"#,
                        base - top
                    );
                }
                bar_index += 1;
            }
            SeriesKind::Markers => {
                for &(x, y) in &s.points {
                    marker(&mut out, sx(x), sy(y), color);
                }
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            W - M - 140.0,
            M + 14.0 * i as f64,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn marker(out: &mut String, x: f64, y: f64, color: &str) {
    let r = 5.0;
    for (dx, dy) in [(r, 0.0), (0.5 * r, 0.87 * r), (-0.5 * r, 0.87 * r)] {
        let _ = writeln!(
            out,
            r#"<polyline points="{:.2},{:.2} {:.2},{:.2}" stroke="{color}" stroke-width="2"/>"#,
            x - dx,
            y - dy,
            x + dx,
            y + dy
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Write an SVG file for the given series.
pub fn emit_svg(series: &[Series], title: &str, path: &Path) -> Result<()> {
    let svg = render_svg(series, title)?;
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_gives_one_marker() {
        let s = render_svg(&[Series::new("p", SeriesKind::Line, vec![(1.0, 2.0)])], "t").unwrap();
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("stroke-width=\"2\"").count(), 3);
    }

    #[test]
    fn empty_series_is_an_error() {
        assert!(render_svg(&[], "t").is_err());
        assert!(render_svg(&[Series::new("e", SeriesKind::Bars, vec![])], "t").is_err());
    }
}
