//! Dependency-free SVG heatmaps for attention matrices.
//!
//! Geometry and colors are integer-valued, so output bytes are fully
//! deterministic.

use std::fmt::Write as _;

/// Render a row-major matrix as a grid of colored cells, low values dark,
/// high values bright.
pub fn heatmap(matrix: &[f64], rows: usize, cols: usize, title: &str) -> String {
    assert_eq!(matrix.len(), rows * cols);
    let cell = (640 / cols.max(rows)).clamp(2, 24);
    let width = cols * cell;
    let height = rows * cell + 20;
    let lo = matrix.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = matrix.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="2" y="14" font-family="monospace" font-size="12">{title}</text>"#
    );
    for r in 0..rows {
        for c in 0..cols {
            let v = (matrix[r * cols + c] - lo) / span;
            let level = (v * 255.0).round().clamp(0.0, 255.0) as u8;
            // dark blue to warm yellow
            let red = level;
            let green = (level as f64 * 0.85) as u8;
            let blue = 64u8.saturating_add(64u8.saturating_sub(level / 4));
            let _ = writeln!(
                out,
                r##"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="#{red:02x}{green:02x}{blue:02x}"/>"##,
                c * cell,
                r * cell + 20,
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
