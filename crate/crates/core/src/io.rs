//! Artifact output: CSV tables, pretty JSON, SVG plots, all written atomically.
//!
//! Floats are printed with Rust's shortest round-trip formatting, so equal inputs give
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::pde_lab::DomainField;

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| invalid(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e)
    })
}

/// Comma-separated, LF line ends, one header row.
pub fn csv_bytes<R, I>(header: &[&str], rows: R) -> Result<Vec<u8>>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Numerical(format!("csv: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        let row: Vec<String> = row.into_iter().collect();
        if row.len() != header.len() {
            return Err(invalid(format!("row has {} fields, header has {}", row.len(), header.len())));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Numerical(format!("csv: {e}")))
}

/// Shortest round-trip form, switching to exponent notation outside `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Rows of floats.
pub fn csv_floats<const N: usize>(header: &[&str; N], rows: &[[f64; N]]) -> Result<Vec<u8>> {
    csv_bytes(header, rows.iter().map(|r| r.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>()))
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

const VIEW: f64 = 500.0;

fn to_view(p: [f64; 2]) -> (f64, f64) {
    (VIEW / 2.0 * (1.0 + p[0]), VIEW / 2.0 * (1.0 - p[1]))
}

fn svg_open(out: &mut String) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{VIEW}" height="{VIEW}" viewBox="0 0 {VIEW} {VIEW}">"#
    );
    let _ = writeln!(out, r#"<circle cx="{0}" cy="{0}" r="{0}" fill="none" stroke="black" stroke-width="1"/>"#, VIEW / 2.0);
}

/// Diverging blue-white-red ramp on `[-1, 1]`.
fn color(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// One square per unknown, colored by `u / max|u|`, inside the unit circle.
pub fn svg_heatmap(field: &DomainField) -> String {
    let mut out = String::new();
    svg_open(&mut out);
    let (scale, _) = field.max_abs();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let side = field.grid.spacing * VIEW / 2.0;
    for (k, v) in field.values.iter().enumerate() {
        let (x, y) = to_view(field.coords(k));
        let _ = writeln!(
            out,
            r#"<rect x="{:.3}" y="{:.3}" width="{side:.3}" height="{side:.3}" fill="{}"/>"#,
            x - side / 2.0,
            y - side / 2.0,
            color(v / scale)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Polylines in disk coordinates, each with its stroke color.
pub fn svg_polylines(lines: &[(Vec<[f64; 2]>, &str)]) -> String {
    let mut out = String::new();
    svg_open(&mut out);
    for (pts, stroke) in lines {
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = to_view(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1"/>"#, coords.join(" "));
    }
    out.push_str("</svg>\n");
    out
}
