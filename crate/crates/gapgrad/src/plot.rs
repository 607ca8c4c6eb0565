//! Minimal log-log SVG plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::report::{ReportBundle, Series};

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotOutcome {
    pub files: Vec<PathBuf>,
    pub note: Option<String>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders one series; `None` when it has no positive points.
pub fn render_series(series: &Series) -> Option<String> {
    let pts: Vec<(f64, f64)> = series
        .points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    if pts.is_empty() {
        return None;
    }
    let (mut x0, mut x1) = pts
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = pts
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad_x = 0.05 * (x1 - x0);
    let pad_y = 0.08 * (y1 - y0);
    let (x0, x1, y0, y1) = (x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let sy = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    // Decade ticks.
    for d in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = sx(d as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"#,
            H - BOTTOM,
            H - BOTTOM + 5.0,
            H - BOTTOM + 18.0
        );
    }
    for d in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let y = sy(d as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 15.0,
        escape(&series.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">{}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0,
        escape(&series.y_label)
    );
    let mut title = escape(&series.name);
    if let Some(fit) = &series.fit {
        let lx: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let (a, b) = (lx[0], *lx.last().unwrap());
        let line = |slope: f64, icpt: f64, colour: &str, dash: &str| {
            let ya = icpt + slope * a;
            let yb = icpt + slope * b;
            format!(
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{colour}" stroke-width="1.5" {dash}/>"#,
                sx(a),
                sy(ya),
                sx(b),
                sy(yb)
            )
        };
        let ln10 = std::f64::consts::LN_10;
        let _ = writeln!(
            s,
            "{}",
            line(fit.slope, fit.intercept / ln10, "#1f77b4", "")
        );
        let _ = write!(title, ": fitted slope {:.5}", fit.slope);
        if let Some(p) = fit.predicted {
            // Guide through the mean of the data.
            let mx = lx.iter().sum::<f64>() / lx.len() as f64;
            let my = pts.iter().map(|q| q.1).sum::<f64>() / pts.len() as f64;
            let _ = writeln!(
                s,
                "{}",
                line(p, my - p * mx, "#d62728", r#"stroke-dasharray="6 4""#)
            );
            let _ = write!(title, ", predicted {p:.5}");
        }
    }
    for (x, y) in &pts {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="black"/>"#,
            sx(*x),
            sy(*y)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle">{title}</text>"#,
        W / 2.0
    );
    s.push_str("</svg>\n");
    Some(s)
}

/// Writes one SVG per series with points; a bundle without any is a no-op.
pub fn emit_plots(bundle: &ReportBundle, dir: &Path) -> std::io::Result<PlotOutcome> {
    let mut out = PlotOutcome::default();
    for series in &bundle.series {
        if let Some(svg) = render_series(series) {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}.svg", series.name));
            std::fs::write(&path, svg)?;
            out.files.push(path);
        }
    }
    if out.files.is_empty() {
        out.note = Some(format!("{}: nothing to plot", bundle.kind.name()));
    }
    Ok(out)
}
