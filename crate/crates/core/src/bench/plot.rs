//! Deterministic SVG line charts: fixed 800x600 viewport, optional log10 y axis
//! with decade gridlines.

use std::fmt::Write;

use crate::error::{Error, Result};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log_y: bool,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let v = if self.log_y { y.log10() } else { y };
        HEIGHT - BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Splits a series into runs of plottable points; SER 0 has no place on a log axis.
fn runs(points: &[(f64, f64)], log_y: bool) -> Vec<Vec<(f64, f64)>> {
    let mut out = vec![Vec::new()];
    for &(x, y) in points {
        if y.is_finite() && x.is_finite() && (!log_y || y > 0.0) {
            out.last_mut().expect("nonempty").push((x, y));
        } else if !out.last().expect("nonempty").is_empty() {
            out.push(Vec::new());
        }
    }
    out.retain(|r| !r.is_empty());
    out
}

/// "Nice" tick step covering `span` with about `target` intervals.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

pub fn render(chart: &Chart) -> Result<String> {
    let pts: Vec<(f64, f64)> = chart
        .series
        .iter()
        .flat_map(|s| runs(&s.points, chart.log_y).into_iter().flatten())
        .collect();
    if pts.is_empty() {
        return Err(Error::Config("nothing to plot: no finite points".into()));
    }
    let (mut x0, mut x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let (y0, y1) = if chart.log_y {
        let (lo, hi) = pts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
        let (lo, hi) = (lo.log10().floor(), hi.log10().ceil());
        (lo, if hi > lo { hi } else { lo + 1.0 })
    } else {
        let hi = pts.iter().fold(0.0f64, |a, p| a.max(p.1));
        (0.0, if hi > 0.0 { hi * 1.05 } else { 1.0 })
    };
    let ax = Axes { x0, x1, y0, y1, log_y: chart.log_y };

    let mut s = String::new();
    let w = &mut s;
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#).ok();
    writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).ok();
    writeln!(w, r#"<text x="{:.2}" y="28" text-anchor="middle" font-size="16">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, escape(&chart.title)).ok();

    // Grid and y ticks.
    if chart.log_y {
        for d in (y0 as i64)..=(y1 as i64) {
            let y = ax.py(10f64.powi(d as i32));
            writeln!(w, r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#bbbbbb"/>"##, WIDTH - RIGHT).ok();
            writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, LEFT - 6.0, y + 4.0).ok();
            if d < y1 as i64 {
                for m in 2..10 {
                    let y = ax.py(m as f64 * 10f64.powi(d as i32));
                    writeln!(w, r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#eeeeee"/>"##, WIDTH - RIGHT).ok();
                }
            }
        }
    } else {
        let step = tick_step(y1 - y0, 8.0);
        let mut t = 0.0;
        while t <= y1 + 1e-12 {
            let y = ax.py(t);
            writeln!(w, r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, WIDTH - RIGHT).ok();
            writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, fmt_tick(t)).ok();
            t += step;
        }
    }
    let step = tick_step(x1 - x0, 10.0);
    let mut t = (x0 / step).ceil() * step;
    while t <= x1 + 1e-9 * step {
        let x = ax.px(t);
        writeln!(w, r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##, HEIGHT - BOTTOM).ok();
        writeln!(w, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, HEIGHT - BOTTOM + 18.0, fmt_tick(t)).ok();
        t += step;
    }
    writeln!(w, r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM).ok();
    writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, HEIGHT - 25.0, escape(&chart.x_label)).ok();
    writeln!(w, r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#, (TOP + HEIGHT - BOTTOM) / 2.0, (TOP + HEIGHT - BOTTOM) / 2.0, escape(&chart.y_label)).ok();

    for (i, series) in chart.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        for run in runs(&series.points, chart.log_y) {
            let coords: Vec<String> = run.iter().map(|&(x, y)| format!("{:.2},{:.2}", ax.px(x), ax.py(y))).collect();
            writeln!(w, r#"<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#, coords.join(" ")).ok();
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        writeln!(w, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/>"#, lx + 24.0).ok();
        writeln!(w, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 30.0, ly + 4.0, escape(&series.label)).ok();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn fmt_tick(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

/// Number of `<polyline>` elements, one per unbroken run of points.
pub fn polyline_count(svg: &str) -> usize {
    svg.matches("<polyline").count()
}
