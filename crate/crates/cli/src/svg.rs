use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mtp_core::cantor::LevelStructure;
use mtp_core::{Aabb, DiscreteMeasure, MtpError, Result};

const SIZE: f64 = 600.0;
const PAD: f64 = 20.0;
const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];
const MAX_CELLS: usize = 20_000;

fn rect(out: &mut String, b: &Aabb, y: (f64, f64), fill: &str, opacity: f64) {
    let sx = |x: f64| PAD + x * (SIZE - 2.0 * PAD);
    let (y0, y1) = if b.dim() >= 2 { (b.lo[1], b.hi[1]) } else { y };
    // SVG y grows downward
    let top = PAD + (1.0 - y1) * (SIZE - 2.0 * PAD);
    let _ = writeln!(
        out,
        r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{fill}" fill-opacity="{opacity:.3}"/>"#,
        sx(b.lo[0]),
        top,
        (b.hi[0] - b.lo[0]) * (SIZE - 2.0 * PAD),
        (y1 - y0) * (SIZE - 2.0 * PAD),
    );
}

/// Level sets in colour, the measure's cells in grey scaled by density. In
/// one dimension each level gets its own horizontal band.
pub fn write_levels(path: &Path, ls: &LevelStructure, mu: &DiscreteMeasure) -> Result<()> {
    let d = mu.dim();
    if d > 2 {
        return Err(MtpError::Precondition("plots are only drawn for d <= 2".into()));
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let bands = ls.levels.len() as f64 + 1.0;
    for (li, level) in ls.levels.iter().enumerate() {
        let band = (1.0 - (li as f64 + 1.0) / bands, 1.0 - (li as f64 + 0.2) / bands);
        let color = COLORS[li % COLORS.len()];
        for e in &level.entries {
            rect(&mut out, &e.ball.to_box(), band, color, 0.15);
            for c in e.set.cubes() {
                rect(&mut out, &c.to_box(), band, color, 0.6);
            }
        }
    }
    if let Ok(cells) = mu.cell_masses(MAX_CELLS) {
        let peak = cells.iter().map(|(c, m)| m / c.volume()).fold(0.0f64, f64::max);
        if peak > 0.0 {
            for (c, m) in &cells {
                rect(&mut out, &c.to_box(), (0.0, 0.8 / bands), "#000000", 0.8 * m / c.volume() / peak);
            }
        }
    }
    out.push_str("</svg>\n");
    fs::write(path, out).map_err(|e| MtpError::Invalid(format!("{}: {e}", path.display())))
}
