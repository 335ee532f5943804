//! Standalone SVG overlays of polarization-voltage sweeps.

use std::fmt::Write as _;
use std::path::Path;

use crate::metrics::FitReport;
use crate::oracle::SweepCurve;
use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const TICKS: usize = 5;

pub struct PlotSeries<'a> {
    pub curve: &'a SweepCurve,
    pub label: &'a str,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if hi - lo < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

/// Renders the curves with axes, a legend and an optional R²/RMSE note.
///
/// Output depends only on the inputs, so identical inputs give identical
/// bytes.
pub fn render_svg(series: &[PlotSeries<'_>], fit: Option<&FitReport>) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.curve.is_empty()) {
        return Err(Error::domain("plot needs at least one non-empty curve"));
    }
    let pts = || series.iter().flat_map(|s| s.curve.points.iter());
    let (vx0, vx1) = extent(pts().map(|p| p.v));
    let (py0, py1) = extent(pts().map(|p| p.p));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |v: f64| MARGIN_LEFT + (v - vx0) / (vx1 - vx0) * plot_w;
    let sy = |p: f64| MARGIN_TOP + (py1 - p) / (py1 - py0) * plot_h;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let v = vx0 + f * (vx1 - vx0);
        let x = sx(v);
        let y_axis = MARGIN_TOP + plot_h;
        writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y_axis:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{v:.2}</text>"#,
            y_axis + 5.0,
            y_axis + 20.0
        )
        .unwrap();
        let p = py0 + f * (py1 - py0);
        let y = sy(p);
        writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_LEFT:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{p:.1}</text>"#,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT - 8.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Voltage (V)</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">Polarization (μC/cm²)</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    )
    .unwrap();

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for (k, p) in ser.curve.points.iter().enumerate() {
            if k > 0 {
                d.push(' ');
            }
            write!(d, "{:.2},{:.2}", sx(p.v), sy(p.p)).unwrap();
        }
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{d}"/>"#
        )
        .unwrap();
        let ly = MARGIN_TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 15.0;
        writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(ser.label)
        )
        .unwrap();
    }
    if let Some(fit) = fit {
        writeln!(
            s,
            r#"<text x="{MARGIN_LEFT:.2}" y="{:.2}">R²: {:.3}, RMSE: {:.3}</text>"#,
            MARGIN_TOP - 12.0,
            fit.r2,
            fit.rmse
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(series: &[PlotSeries<'_>], fit: Option<&FitReport>, path: impl AsRef<Path>) -> Result<()> {
    let svg = render_svg(series, fit)?;
    std::fs::write(path, svg)?;
    Ok(())
}
