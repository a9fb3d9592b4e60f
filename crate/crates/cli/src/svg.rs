// SPDX-License-Identifier: Apache-2.0

//! Static SVG charts drawn straight from [`Table`] columns, so a plot can
//! only show numbers that are in its table.

use std::fmt::Write as _;

use crate::table::Table;

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    /// Horizontal then vertical, for CDFs.
    Step,
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>, y_from_zero: bool) -> Self {
        let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for (px, py) in points {
            x = (x.0.min(px), x.1.max(px));
            y = (y.0.min(py), y.1.max(py));
        }
        if !x.0.is_finite() {
            x = (0.0, 1.0);
            y = (0.0, 1.0);
        }
        if y_from_zero {
            y = (y.0.min(0.0), y.1.max(0.0));
        }
        let pad = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { x: pad(x), y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e6).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn open(out: &mut String, title: &str, x_label: &str, y_label: &str, f: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        xml(title)
    );
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(out, r##"<path d="M{x0} {y0}V{y1}H{x1}" fill="none" stroke="#333"/>"##);
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = writeln!(
            out,
            r##"<path d="M{px:.2} {y1}v5M{x0} {py:.2}h-5" stroke="#333"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            y1 + 18.0,
            tick_label(xv),
            x0 - 8.0,
            py + 4.0,
            tick_label(yv)
        );
        let _ = writeln!(
            out,
            r##"<path d="M{x0} {py:.2}H{x1}" stroke="#ddd" stroke-width="0.5"/>"##
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 14.0,
        xml(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        xml(y_label)
    );
}

fn legend(out: &mut String, series: &[Series]) {
    if series.len() < 2 {
        return;
    }
    for (i, s) in series.iter().enumerate() {
        let y = TOP + 12.0 + i as f64 * 16.0;
        let x = LEFT + 12.0;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<path d="M{x} {y}h18" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x + 24.0,
            y + 4.0,
            xml(&s.label)
        );
    }
}

fn draw_lines(title: &str, [x_label, y_label]: [&str; 2], series: Vec<Series>, style: Style) -> String {
    let frame = Frame::fit(
        series.iter().flat_map(|s| s.points.iter().copied()),
        style == Style::Line,
    );
    let mut out = String::new();
    open(&mut out, title, x_label, y_label, &frame);
    for (i, s) in series.iter().enumerate() {
        let mut d = String::new();
        let mut prev_y: Option<f64> = None;
        for &(x, y) in &s.points {
            let (px, py) = (frame.px(x), frame.py(y));
            match (prev_y, style) {
                (None, Style::Step) => {
                    let _ = write!(d, "M{:.2} {:.2}H{px:.2}V{py:.2}", frame.px(frame.x.0), frame.py(0.0));
                }
                (None, Style::Line) => {
                    let _ = write!(d, "M{px:.2} {py:.2}");
                }
                (Some(_), Style::Step) => {
                    let _ = write!(d, "H{px:.2}V{py:.2}");
                }
                (Some(_), Style::Line) => {
                    let _ = write!(d, "L{px:.2} {py:.2}");
                }
            }
            prev_y = Some(y);
        }
        if !d.is_empty() {
            let color = PALETTE[i % PALETTE.len()];
            let _ = writeln!(
                out,
                r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.6"/>"#
            );
        }
    }
    legend(&mut out, &series);
    out.push_str("</svg>\n");
    out
}

fn numeric(table: &Table, name: &str) -> Vec<Option<f64>> {
    table
        .column(name)
        .unwrap_or_else(|| panic!("table has no column {name:?}"))
}

/// One line per `y` column against column `x`. Rows with an empty cell are
/// skipped for that line.
pub fn lines(title: &str, table: &Table, x: &str, ys: &[&str], style: Style, axes: [&str; 2]) -> String {
    let xs = numeric(table, x);
    let series = ys
        .iter()
        .map(|y| Series {
            label: y.to_string(),
            points: xs
                .iter()
                .zip(numeric(table, y))
                .filter_map(|(a, b)| Some(((*a)?, b?)))
                .collect(),
        })
        .collect();
    draw_lines(title, axes, series, style)
}

/// One line per distinct value of `group`, in first-seen order.
pub fn grouped_lines(
    title: &str,
    table: &Table,
    group: &str,
    x: &str,
    y: &str,
    style: Style,
    axes: [&str; 2],
) -> String {
    let g = table
        .header
        .iter()
        .position(|h| h == group)
        .unwrap_or_else(|| panic!("no column {group:?}"));
    let (xs, ys) = (numeric(table, x), numeric(table, y));
    let mut series: Vec<Series> = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let Some(p) = xs[i].zip(ys[i]) else { continue };
        match series.iter_mut().find(|s| s.label == row[g]) {
            Some(s) => s.points.push(p),
            None => series.push(Series {
                label: row[g].clone(),
                points: vec![p],
            }),
        }
    }
    draw_lines(title, axes, series, style)
}

/// Bars spanning `[lo, hi)` with height `value`.
pub fn histogram(title: &str, table: &Table, lo: &str, hi: &str, value: &str, axes: [&str; 2]) -> String {
    let (los, his, vs) = (numeric(table, lo), numeric(table, hi), numeric(table, value));
    let bars: Vec<(f64, f64, f64)> = (0..los.len())
        .filter_map(|i| Some((los[i]?, his[i]?, vs[i]?)))
        .collect();
    let frame = Frame::fit(bars.iter().flat_map(|&(a, b, v)| [(a, v), (b, 0.0)]), true);
    let mut out = String::new();
    open(&mut out, title, axes[0], axes[1], &frame);
    for (a, b, v) in bars {
        let (x0, x1) = (frame.px(a), frame.px(b));
        let (y0, y1) = (frame.py(v.max(0.0)), frame.py(v.min(0.0)));
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4" stroke="white" stroke-width="0.5"/>"##,
            (x1 - x0).max(0.0),
            (y1 - y0).max(0.0)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        let mut t = Table::new(["x", "a", "b"]);
        t.push(["0", "1", ""]);
        t.push(["1", "2", "3"]);
        t
    }

    #[test]
    fn line_chart_is_well_formed_and_stable() {
        let svg = lines("t", &table(), "x", &["a", "b"], Style::Line, ["x", "y"]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("stroke-width=\"1.6\"").count(), 2);
        assert_eq!(svg, lines("t", &table(), "x", &["a", "b"], Style::Line, ["x", "y"]));
    }

    #[test]
    fn histogram_draws_one_rect_per_bar() {
        let mut t = Table::new(["lo", "hi", "density"]);
        for i in 0..4 {
            t.push([i as f64, i as f64 + 1.0, 0.25]);
        }
        let svg = histogram("h", &t, "lo", "hi", "density", ["x", "y"]);
        assert_eq!(svg.matches("<rect").count(), 5);
    }

    #[test]
    fn titles_are_escaped() {
        let svg = lines("a < b & c", &table(), "x", &["a"], Style::Step, ["x", "y"]);
        assert!(svg.contains("a &lt; b &amp; c"));
    }

    #[test]
    fn constant_data_gets_a_nonempty_frame() {
        let mut t = Table::new(["x", "y"]);
        t.push(["5", "0"]);
        let svg = lines("c", &t, "x", &["y"], Style::Line, ["x", "y"]);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
