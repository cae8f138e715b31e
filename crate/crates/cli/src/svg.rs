//! Minimal standalone SVG line charts (no rendering dependencies).
//!
//! Output is a complete SVG document with axes, tick labels, and a title;
//! coordinates are formatted with fixed precision so repeated runs emit
//! identical bytes.

use chrono::NaiveDate;
use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 780.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 430.0;

/// Renders one series against its calendar as an SVG line chart.
///
/// Dates and values must be non-empty and equally long; the x axis spaces
/// observations evenly and labels a handful of dates.
pub fn line_chart(title: &str, dates: &[NaiveDate], values: &[f64]) -> String {
    assert_eq!(dates.len(), values.len(), "calendar/series length mismatch");
    assert!(!values.is_empty(), "empty series");

    let n = values.len();
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let pad = ((hi - lo) * 0.05).max(1e-9 + hi.abs() * 1e-12);
    lo -= pad;
    hi += pad;

    let x_at = |i: usize| {
        if n == 1 {
            (LEFT + RIGHT) / 2.0
        } else {
            LEFT + (RIGHT - LEFT) * i as f64 / (n - 1) as f64
        }
    };
    let y_at = |v: f64| BOTTOM - (BOTTOM - TOP) * (v - lo) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        (LEFT + RIGHT) / 2.0,
        escape(title)
    );

    // Horizontal grid lines with y labels.
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = y_at(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{RIGHT}" y2="{y:.2}" stroke="#dddddd" stroke-width="1"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{v:.3}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }

    // Date labels along the x axis.
    let ticks = 5.min(n);
    for k in 0..ticks {
        let i = if ticks == 1 { 0 } else { (n - 1) * k / (ticks - 1) };
        let x = x_at(i);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{BOTTOM}" x2="{x:.2}" y2="{:.1}" stroke="#999999" stroke-width="1"/>"##,
            BOTTOM + 4.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            BOTTOM + 18.0,
            dates[i]
        );
    }

    // Axes.
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{BOTTOM}" stroke="black" stroke-width="1"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{BOTTOM}" x2="{RIGHT}" y2="{BOTTOM}" stroke="black" stroke-width="1"/>"#
    );

    let mut points = String::new();
    for (i, &v) in values.iter().enumerate() {
        let _ = write!(points, "{:.2},{:.2} ", x_at(i), y_at(v));
    }
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#2b6cb0" stroke-width="1.5"/>"##,
        points.trim_end()
    );
    let _ = writeln!(svg, "</svg>");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
