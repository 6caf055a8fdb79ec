//! Minimal SVG line plots: axes, ticks, legend, one polyline per series.

use std::fmt::Write as _;

use dpirs::bench::{format_sig, ResultTable};

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub x_label: String,
    pub y_label: String,
    /// `(name, points)`; every series uses the same x values.
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

impl PlotSpec {
    /// Mean SE against the sweep value, one series per scheme in table order.
    pub fn from_table(table: &ResultTable, x_label: &str) -> Self {
        let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for row in &table.rows {
            let point = (row.sweep_value, row.mean_se);
            match series.iter_mut().find(|(name, _)| *name == row.scheme) {
                Some((_, pts)) => pts.push(point),
                None => series.push((row.scheme.clone(), vec![point])),
            }
        }
        Self {
            x_label: x_label.to_string(),
            y_label: "Spectral efficiency (bit/s/Hz)".to_string(),
            series,
        }
    }
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 9] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

pub fn render_svg(plot: &PlotSpec) -> String {
    let points = || plot.series.iter().flat_map(|(_, p)| p.iter());
    let (x0, x1) = range(points().map(|p| p.0));
    let (y0, y1) = range(points().map(|p| p.1));
    let pad = (y1 - y0) * 0.05;
    let (y0, y1) = (y0 - pad, y1 + pad);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{b:.2}" x2="{px:.2}" y2="{b2:.2}" stroke="black"/><text x="{px:.2}" y="{ty:.2}" text-anchor="middle">{lx}</text>"##,
            b = TOP + ph,
            b2 = TOP + ph + 5.0,
            ty = TOP + ph + 18.0,
            lx = format_sig(xv),
        );
        let _ = writeln!(
            s,
            r##"<line x1="{l:.2}" y1="{py:.2}" x2="{l2:.2}" y2="{py:.2}" stroke="black"/><text x="{tx:.2}" y="{ty:.2}" text-anchor="end">{ly}</text>"##,
            l = LEFT - 5.0,
            l2 = LEFT,
            tx = LEFT - 8.0,
            ty = py + 4.0,
            ly = format_sig((yv * 100.0).round() / 100.0),
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{x:.2}" y="{y:.2}" text-anchor="middle">{t}</text>"#,
        x = LEFT + pw / 2.0,
        y = HEIGHT - 15.0,
        t = escape(&plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{y:.2}" text-anchor="middle" transform="rotate(-90 18 {y:.2})">{t}</text>"#,
        y = TOP + ph / 2.0,
        t = escape(&plot.y_label)
    );
    for (k, (name, pts)) in plot.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = pts
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{x2}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{tx}" y="{ty}">{n}</text>"#,
            x2 = lx + 24.0,
            tx = lx + 30.0,
            ty = ly + 4.0,
            n = escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}
