//! Artifact writers: patch meshes (OBJ for surfaces in R^3, CSV grids for
//! higher dimensions), curve polylines, and developed-strip SVG/CSV.
//!
//! All writers render to strings deterministically; the command layer puts
//! them on disk.

use std::fmt::Write as _;

use thiserror::Error;

use crate::develop::{DevelopError, PlanarStrip};
use crate::flatapprox::{FlatError, RuledPatch};

/// Patch mesh resolution along the curve (OBJ, m = 2).
pub const OBJ_T_SAMPLES: usize = 256;
/// Patch mesh resolution across the ruling (OBJ, m = 2).
pub const OBJ_U_SAMPLES: usize = 33;
/// Sample grid along the curve for CSV exports (m >= 3).
pub const CSV_T_SAMPLES: usize = 65;
/// Samples per ruling coordinate for CSV exports.
pub const CSV_U_SAMPLES: usize = 5;
/// Developed-strip scale: one length unit is this many pixels.
pub const SVG_SCALE: f64 = 100.0;
const SVG_MARGIN: f64 = 20.0;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Flat(#[from] FlatError),
    #[error(transparent)]
    Develop(#[from] DevelopError),
    #[error("mesh export covers surfaces in R^3 (m = 2), got m = {m}")]
    NotPlanar { m: usize },
}

/// Row node indices for a mesh of up to `nt` rows: evenly spread, snapped
/// to frame nodes so every exported vertex is an exact patch sample.
fn mesh_rows(steps: usize, nt: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..nt)
        .map(|i| ((i as f64 / (nt - 1) as f64) * steps as f64).round() as usize)
        .collect();
    rows.dedup();
    rows
}

/// Triangulated OBJ of the patch over the curve and the ruling box (m = 2).
/// One family of grid lines runs along the rulings.
pub fn render_patch_obj(patch: &RuledPatch) -> Result<String, ExportError> {
    let m = patch.frames.m();
    if m != 2 {
        return Err(ExportError::NotPlanar { m });
    }
    let half = patch.half_widths[0];
    let rows = mesh_rows(patch.frames.steps(), OBJ_T_SAMPLES);
    let (nt, nu) = (rows.len(), OBJ_U_SAMPLES);
    let mut out = String::new();
    out.push_str("# ruled patch mesh: rows follow the curve, columns the ruling\n");
    let _ = writeln!(out, "o patch");
    for &row in &rows {
        let node = &patch.frames.nodes[row];
        let x = &patch.field.x[row][0];
        for j in 0..nu {
            let u = -half + 2.0 * half * j as f64 / (nu - 1) as f64;
            let p = &node.position + x * u;
            let _ = writeln!(out, "v {} {} {}", p[0], p[1], p[2]);
        }
    }
    let idx = |i: usize, j: usize| i * nu + j + 1;
    for i in 0..nt - 1 {
        for j in 0..nu - 1 {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            let _ = writeln!(out, "f {a} {b} {c}");
            let _ = writeln!(out, "f {a} {c} {d}");
        }
    }
    for i in 0..nt {
        let _ = write!(out, "l");
        for j in 0..nu {
            let _ = write!(out, " {}", idx(i, j));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Curve polyline OBJ from the frame nodes.
pub fn render_curve_obj(patch: &RuledPatch) -> Result<String, ExportError> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# curve polyline ({} nodes{})",
        patch.frames.nodes.len(),
        if patch.frames.closed { ", closed" } else { "" }
    );
    let _ = writeln!(out, "o curve");
    for node in &patch.frames.nodes {
        let _ = write!(out, "v");
        for c in node.position.iter() {
            let _ = write!(out, " {c}");
        }
        out.push('\n');
    }
    let _ = write!(out, "l");
    for i in 1..=patch.frames.nodes.len() {
        let _ = write!(out, " {i}");
    }
    out.push('\n');
    Ok(out)
}

fn crlf_row(out: &mut String, cells: &[String]) {
    out.push_str(&cells.join(","));
    out.push_str("\r\n");
}

/// CSV grid of patch samples with header t,u1..u_{m-1},x1..x_{m+1}
/// (RFC 4180: comma separated, CRLF line endings).
pub fn render_patch_csv(patch: &RuledPatch) -> Result<String, ExportError> {
    let m = patch.frames.m();
    let dims = m - 1;
    let ambient = patch.frames.nodes[0].position.len();
    let mut out = String::new();
    let mut header: Vec<String> = vec!["t".to_string()];
    header.extend((1..=dims).map(|j| format!("u{j}")));
    header.extend((1..=ambient).map(|j| format!("x{j}")));
    crlf_row(&mut out, &header);
    let combos = CSV_U_SAMPLES.pow(dims as u32);
    for row in mesh_rows(patch.frames.steps(), CSV_T_SAMPLES) {
        let node = &patch.frames.nodes[row];
        let xs = &patch.field.x[row];
        for combo in 0..combos {
            let mut cells = vec![format!("{}", node.t)];
            let mut p = node.position.clone();
            let mut rest = combo;
            for (j, x) in xs.iter().enumerate() {
                let step = rest % CSV_U_SAMPLES;
                rest /= CSV_U_SAMPLES;
                let u = -patch.half_widths[j]
                    + 2.0 * patch.half_widths[j] * step as f64 / (CSV_U_SAMPLES - 1) as f64;
                cells.push(format!("{u}"));
                p += x * u;
            }
            cells.extend(p.iter().map(|c| format!("{c}")));
            crlf_row(&mut out, &cells);
        }
    }
    Ok(out)
}

/// Developed strip CSV: t,x,y,ruling_angle (angle of the plane ruling,
/// radians; RFC 4180 line endings).
pub fn render_strip_csv(strip: &PlanarStrip) -> String {
    let mut out = String::new();
    crlf_row(
        &mut out,
        &["t", "x", "y", "ruling_angle"]
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>(),
    );
    for i in 0..strip.t.len() {
        let angle = strip.ruling[i][1].atan2(strip.ruling[i][0]);
        crlf_row(
            &mut out,
            &[
                format!("{}", strip.t[i]),
                format!("{}", strip.curve[i][0]),
                format!("{}", strip.curve[i][1]),
                format!("{angle}"),
            ],
        );
    }
    out
}

/// Developed strip SVG: outline, ruling family, and the center curve at
/// one length unit per 100 px.
pub fn render_strip_svg(strip: &PlanarStrip) -> String {
    let n = strip.curve.len();
    let (lo, hi) = strip.half_widths;
    let top: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            [
                strip.curve[i][0] + hi * strip.ruling[i][0],
                strip.curve[i][1] + hi * strip.ruling[i][1],
            ]
        })
        .collect();
    let bottom: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            [
                strip.curve[i][0] - lo * strip.ruling[i][0],
                strip.curve[i][1] - lo * strip.ruling[i][1],
            ]
        })
        .collect();
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in top.iter().chain(&bottom) {
        for c in 0..2 {
            min[c] = min[c].min(p[c]);
            max[c] = max[c].max(p[c]);
        }
    }
    let sx = |x: f64| (x - min[0]) * SVG_SCALE + SVG_MARGIN;
    let sy = |y: f64| (max[1] - y) * SVG_SCALE + SVG_MARGIN;
    let width = (max[0] - min[0]) * SVG_SCALE + 2.0 * SVG_MARGIN;
    let height = (max[1] - min[1]) * SVG_SCALE + 2.0 * SVG_MARGIN;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         width=\"{width:.4}\" height=\"{height:.4}\" \
         viewBox=\"0 0 {width:.4} {height:.4}\">"
    );
    // outline: upper edge forward, lower edge backward, closed by the end
    // rulings (straight in the plane)
    let mut d = String::new();
    for (i, p) in top.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(d, "{cmd}{:.4} {:.4} ", sx(p[0]), sy(p[1]));
    }
    for p in bottom.iter().rev() {
        let _ = write!(d, "L{:.4} {:.4} ", sx(p[0]), sy(p[1]));
    }
    d.push('Z');
    let _ = writeln!(
        out,
        "<path d=\"{d}\" fill=\"#f2f2f2\" stroke=\"#222222\" stroke-width=\"1.5\"/>"
    );
    let stride = ((n - 1) / 64).max(1);
    let mut i = 0;
    while i < n {
        let _ = writeln!(
            out,
            "<line x1=\"{:.4}\" y1=\"{:.4}\" x2=\"{:.4}\" y2=\"{:.4}\" \
             stroke=\"#999999\" stroke-width=\"0.75\"/>",
            sx(bottom[i][0]),
            sy(bottom[i][1]),
            sx(top[i][0]),
            sy(top[i][1])
        );
        if i == n - 1 {
            break;
        }
        i = (i + stride).min(n - 1);
    }
    let mut c = String::new();
    for (i, p) in strip.curve.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(c, "{cmd}{:.4} {:.4} ", sx(p[0]), sy(p[1]));
    }
    let _ = writeln!(
        out,
        "<path d=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>",
        c.trim_end()
    );
    out.push_str("</svg>\n");
    out
}
