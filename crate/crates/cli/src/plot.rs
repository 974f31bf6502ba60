//! Minimal static SVG line charts: MSE against the true dCor, one panel per
//! (model, n), one line per estimator.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::report::CsvRow;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 44.0;
const COLORS: [&str; 10] =
    ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn mse_chart(rows: &[CsvRow]) -> String {
    let mut panels: BTreeMap<(String, usize), Vec<&CsvRow>> = BTreeMap::new();
    for r in rows {
        panels.entry((r.model.clone(), r.n)).or_default().push(r);
    }
    let mut estimators: Vec<&str> = Vec::new();
    for r in rows {
        if !estimators.contains(&r.estimator.as_str()) {
            estimators.push(&r.estimator);
        }
    }
    let cols = panels.len().clamp(1, 3);
    let nrows = panels.len().div_ceil(cols).max(1);
    let width = cols as f64 * PANEL_W;
    let legend_h = 20.0 * estimators.len() as f64 + 10.0;
    let height = nrows as f64 * PANEL_H + legend_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, ((model, n), prow)) in panels.iter().enumerate() {
        let ox = (i % cols) as f64 * PANEL_W;
        let oy = (i / cols) as f64 * PANEL_H;
        let (x0, x1) = (ox + MARGIN, ox + PANEL_W - 12.0);
        let (y0, y1) = (oy + PANEL_H - MARGIN + 10.0, oy + 24.0);
        let xmax = prow.iter().map(|r| r.dcor_true).fold(0.0, f64::max).max(1e-9);
        let ymax = prow.iter().map(|r| r.mse).fold(0.0, f64::max).max(1e-12);
        let sx = |v: f64| x0 + (x1 - x0) * v / xmax;
        let sy = |v: f64| y0 - (y0 - y1) * v / ymax;
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{} n = {n}</text>"#, (x0 + x1) / 2.0, oy + 14.0, escape(model));
        let _ = writeln!(svg, r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>"#);
        let _ = writeln!(svg, r#"<text x="{x0}" y="{}">0</text><text x="{x1}" y="{}" text-anchor="end">{xmax:.3}</text>"#, y0 + 14.0, y0 + 14.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{y1}" text-anchor="end">{ymax:.2e}</text>"#, x0 - 4.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">dCor</text>"#, (x0 + x1) / 2.0, y0 + 26.0);
        for (k, est) in estimators.iter().enumerate() {
            let mut pts: Vec<(f64, f64)> =
                prow.iter().filter(|r| r.estimator == *est).map(|r| (r.dcor_true, r.mse)).collect();
            if pts.is_empty() {
                continue;
            }
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let color = COLORS[k % COLORS.len()];
            let _ = writeln!(svg, r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, d.join(" "));
        }
    }
    let ly = nrows as f64 * PANEL_H;
    for (k, est) in estimators.iter().enumerate() {
        let y = ly + 14.0 + 20.0 * k as f64;
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(svg, r#"<line x1="20" y1="{y}" x2="44" y2="{y}" stroke="{color}" stroke-width="2"/>"#);
        let _ = writeln!(svg, r#"<text x="50" y="{}">{}</text>"#, y + 4.0, escape(est));
    }
    svg.push_str("</svg>\n");
    svg
}
