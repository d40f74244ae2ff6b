//! Deterministic file output: CSV with locale-independent 17-significant-digit
//! floats, a JSON manifest of the resolved configuration, and an SVG leaf
//! plot.

use std::io::Write;
use std::path::{Path, PathBuf};

use tfe_core::foliation::Leaf;

use crate::config::RunConfig;
use crate::CliError;

/// Shortest-faithful decimal: 17 significant digits round-trip any f64 and
/// never depend on locale.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_manifest(dir: &Path, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(cfg)
        .map_err(|e| CliError::Runtime(format!("manifest serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

pub fn write_csv<I>(path: &Path, header: &str, rows: I) -> Result<usize, CliError>
where
    I: IntoIterator<Item = String>,
{
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(header.as_bytes())?;
    w.write_all(b"\n")?;
    let mut n = 0;
    for row in rows {
        w.write_all(row.as_bytes())?;
        w.write_all(b"\n")?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#e377c2",
];

/// Writes an orthogonal projection of the leaves onto the coordinate plane
/// spanned by the two axes with the largest extents. The vertical axis is
/// flipped so the plot reads in the usual orientation.
pub fn write_svg(path: &Path, leaves: &[Leaf]) -> Result<(), CliError> {
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for leaf in leaves {
        for p in &leaf.points {
            for i in 0..3 {
                min[i] = min[i].min(p[i]);
                max[i] = max[i].max(p[i]);
            }
        }
    }
    if leaves.iter().all(|l| l.points.is_empty()) {
        min = [0.0; 3];
        max = [1.0; 3];
    }
    let ext = [max[0] - min[0], max[1] - min[1], max[2] - min[2]];
    let mut drop = 0;
    for i in 1..3 {
        if ext[i] < ext[drop] {
            drop = i;
        }
    }
    let (hx, vx) = match drop {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let names = ["x1", "x2", "x3"];

    let span_h = (max[hx] - min[hx]).max(1e-9);
    let span_v = (max[vx] - min[vx]).max(1e-9);
    let margin = 0.05 * span_h.max(span_v).max(1e-9);
    // SVG y grows downward; plot with v negated so the axis reads upward.
    let vb_x = min[hx] - margin;
    let vb_y = -max[vx] - margin;
    let vb_w = span_h + 2.0 * margin;
    let vb_h = span_v + 2.0 * margin;
    let stroke = 0.005 * vb_w.max(vb_h);
    let font = 0.04 * vb_w.max(vb_h);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{vb_x:.6} {vb_y:.6} {vb_w:.6} {vb_h:.6}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"{vb_x:.6}\" y=\"{vb_y:.6}\" width=\"{vb_w:.6}\" height=\"{vb_h:.6}\" fill=\"white\"/>\n"
    ));
    for (i, leaf) in leaves.iter().enumerate() {
        if leaf.points.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> =
            leaf.points.iter().map(|p| format!("{:.6},{:.6}", p[hx], -p[vx])).collect();
        svg.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{stroke:.6}\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{:.6}\" y=\"{:.6}\" font-size=\"{font:.6}\" fill=\"#555\">{} \u{2192}</text>\n",
        vb_x + 0.3 * margin,
        vb_y + vb_h - 0.3 * margin,
        names[hx]
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.6}\" y=\"{:.6}\" font-size=\"{font:.6}\" fill=\"#555\">{} \u{2191}</text>\n",
        vb_x + 0.3 * margin,
        vb_y + font,
        names[vx]
    ));
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}
