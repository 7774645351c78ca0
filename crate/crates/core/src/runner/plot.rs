//! Self-contained SVG line charts of metric trends.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use super::csv::MetricsTable;
use crate::{Error, Result};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Renders the series as one SVG document. Accuracy-like data (all values in
/// [0, 1]) gets a fixed [0, 1] y-axis.
pub fn render_svg(series: &[Series], title: &str, y_label: &str) -> Result<String> {
    let drawn: Vec<&Series> = series.iter().filter(|s| !s.points.is_empty()).collect();
    if drawn.is_empty() {
        return Err(Error::Config("nothing to plot: every series is empty".into()));
    }
    let all = || drawn.iter().flat_map(|s| s.points.iter());
    let (x_lo, mut x_hi) = bounds(all().map(|p| p.0));
    if x_hi <= x_lo {
        x_hi = x_lo + 1.0;
    }
    let (mut y_lo, mut y_hi) = bounds(all().map(|p| p.1));
    if y_lo >= 0.0 && y_hi <= 1.0 {
        (y_lo, y_hi) = (0.0, 1.0);
    } else if y_hi - y_lo < 1e-12 {
        (y_lo, y_hi) = (y_lo - 0.5, y_hi + 0.5);
    } else {
        let pad = 0.05 * (y_hi - y_lo);
        (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut svg = String::new();
    let w = &mut svg;
    // Writing into a String cannot fail.
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    for i in 0..=5 {
        let y = y_lo + (y_hi - y_lo) * i as f64 / 5.0;
        let py = sy(y);
        let _ = writeln!(
            w,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            py + 4.0,
            tick_label(y)
        );
    }
    for i in 0..=5 {
        let x = x_lo + (x_hi - x_lo) * i as f64 / 5.0;
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(x),
            TOP + plot_h + 18.0,
            tick_label(x)
        );
    }
    let _ = writeln!(
        w,
        r##"<polyline points="{LEFT},{TOP} {LEFT},{bottom} {right},{bottom}" fill="none" stroke="#333"/>"##,
        bottom = TOP + plot_h,
        right = LEFT + plot_w
    );
    let _ = writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle">epoch</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        w,
        r#"<text transform="translate(16,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + plot_h / 2.0,
        escape(y_label)
    );
    for (i, s) in drawn.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            w,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 16.0;
        let _ = writeln!(
            w,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn tick_label(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round())
    } else {
        format!("{v:.2}")
    }
}

/// One series per (file, column) pair, labelled `file-stem:column` when more
/// than one file is given.
pub fn series_from_csvs(paths: &[PathBuf], columns: &[String]) -> Result<Vec<Series>> {
    let mut out = Vec::new();
    for path in paths {
        let table = MetricsTable::read(path)?;
        let stem = run_label(path);
        for col in columns {
            let points = table.series(col).ok_or_else(|| {
                Error::format(path, "metrics csv", format!("no column `{col}`"))
            })?;
            let label = if paths.len() > 1 {
                format!("{stem}:{col}")
            } else {
                col.clone()
            };
            out.push(Series { label, points });
        }
    }
    Ok(out)
}

/// The run directory name for `<run>/metrics.csv`, else the file stem.
fn run_label(path: &Path) -> String {
    let parent = path.parent().and_then(Path::file_name).map(|s| s.to_string_lossy().into_owned());
    match (path.file_name().and_then(|f| f.to_str()), parent) {
        (Some("metrics.csv"), Some(dir)) => dir,
        _ => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into()),
    }
}
