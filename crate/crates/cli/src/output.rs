//! Run artifacts: `series.csv`, `report.txt` and the SVG plots.

use std::fmt::Write as _;
use std::path::Path;

use nrrd_core::evolve::TimeSeries;
use nrrd_core::Field;

use crate::error::{CliError, Result};

pub const SERIES_HEADER: [&str; 9] =
    ["t", "linf_u1", "linf_u2", "mass_u1", "mass_u2", "bnd_u2", "bnd_u2_gamma", "mass_u1u2", "dt"];

/// Every `stride`-th sample plus the last one. `{:?}` prints the shortest
/// decimal that parses back to the same f64.
pub fn series_csv(series: &TimeSeries, stride: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Format(format!("csv: {e}"));
    w.write_record(SERIES_HEADER).map_err(csv_err)?;
    let samples = series.samples();
    let stride = stride.max(1);
    for (k, s) in samples.iter().enumerate() {
        if k % stride != 0 && k + 1 != samples.len() {
            continue;
        }
        let row = [s.t, s.linf_u1, s.linf_u2, s.mass_u1, s.mass_u2, s.bnd_u2, s.bnd_u2_gamma, s.mass_u1u2, s.dt];
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Format(format!("csv: {e}")))
}

/// `key: value` lines in insertion order.
#[derive(Debug, Default, Clone)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn add(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    /// `f64` values in round-trip form.
    pub fn num(&mut self, key: &str, value: f64) {
        self.add(key, format!("{value:?}"));
    }

    pub fn opt(&mut self, key: &str, value: Option<impl std::fmt::Display>) {
        match value {
            Some(v) => self.add(key, v),
            None => self.add(key, "n/a"),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.lines.iter().map(|(k, v)| format!("{k}: {v}\n")).collect()
    }
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::io(path, e))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

struct Curve<'a> {
    label: &'a str,
    points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg_plot(title: &str, y_label: &str, curves: &[Curve]) -> String {
    let finite = curves.iter().flat_map(|c| c.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x0 < x1) {
        (x0, x1) = (x0.min(0.0), x0.max(0.0) + 1.0);
    }
    if !(y0 < y1) {
        (y0, y1) = if y0.is_finite() { (y0 - 1.0, y0 + 1.0) } else { (0.0, 1.0) };
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>
<line x1="{MARGIN}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{b}" stroke="black"/>
<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="10">{x0:.4}</text>
<text x="{r}" y="{}" text-anchor="end" font-family="sans-serif" font-size="10">{x1:.4}</text>
<text x="5" y="{b}" font-family="sans-serif" font-size="10">{y0:.3}</text>
<text x="5" y="{}" font-family="sans-serif" font-size="10">{y1:.3}</text>
<text x="12" y="{}" font-family="sans-serif" font-size="11" transform="rotate(-90 12 {})">{}</text>"#,
        WIDTH / 2.0,
        escape(title),
        HEIGHT - MARGIN + 15.0,
        HEIGHT - MARGIN + 15.0,
        MARGIN - 5.0,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label),
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
    );
    for (k, c) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = MARGIN + 15.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}" font-family="sans-serif" font-size="11">{}</text>"#,
            WIDTH - MARGIN - 80.0,
            escape(c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// `log10` of the sup norms against time.
pub fn norms_svg(series: &TimeSeries) -> String {
    let log = |v: f64| if v > 0.0 { v.log10() } else { f64::NAN };
    let s = series.samples();
    let curves = [
        Curve { label: "‖u1‖∞", points: s.iter().map(|x| (x.t, log(x.linf_u1))).collect() },
        Curve { label: "‖u2‖∞", points: s.iter().map(|x| (x.t, log(x.linf_u2))).collect() },
    ];
    svg_plot("sup norms", "log10 norm", &curves)
}

/// Profiles along x; in 2D the middle row `j = ny/2`.
pub fn profiles_svg(title: &str, fields: &[(&str, &Field)]) -> String {
    let curves: Vec<Curve> = fields
        .iter()
        .map(|(label, f)| {
            let g = f.grid();
            let row = if g.dim() == 2 { g.ny() / 2 } else { 0 };
            let nx = g.nx();
            let points = (0..nx).map(|i| (g.coords(i + nx * row)[0], f.values()[i + nx * row])).collect();
            Curve { label, points }
        })
        .collect();
    svg_plot(title, "value", &curves)
}
