//! Artifact writers: CSV tables with 17 significant digits and SVG heatmaps.

use std::fmt::Write as _;
use std::path::Path;

use fluxon::exact_ist::WaveSample;

use crate::compare::{ComparisonRecord, TableRow};
use crate::config::SvgSpec;
use crate::error::Result;

/// Format a float with 17 significant digits.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header of solution tables.
pub const SAMPLE_HEADER: [&str; 7] = ["x", "t", "N", "cos_half", "sin_half", "eps_ut", "u_mod4pi"];

fn sample_fields(s: &WaveSample) -> [String; 4] {
    [fmt(s.cos_half), fmt(s.sin_half), fmt(s.eps_ut), fmt(s.u_mod4pi)]
}

/// Write a solution table.
pub fn write_samples(path: &Path, rows: &[TableRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SAMPLE_HEADER)?;
    for r in rows {
        let mut rec = vec![fmt(r.sample.x), fmt(r.sample.t), r.n.to_string()];
        rec.extend(sample_fields(&r.sample));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a comparison table.
pub fn write_comparison(path: &Path, rows: &[ComparisonRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "x",
        "t",
        "N",
        "cos_half_exact",
        "sin_half_exact",
        "eps_ut_exact",
        "u_mod4pi_exact",
        "cos_half_asymp",
        "sin_half_asymp",
        "eps_ut_asymp",
        "u_mod4pi_asymp",
        "err_cos",
        "err_sin",
        "err_ut",
    ])?;
    for r in rows {
        let mut rec = vec![fmt(r.exact.x), fmt(r.exact.t), r.n.to_string()];
        rec.extend(sample_fields(&r.exact));
        rec.extend(sample_fields(&r.asymp));
        rec.extend([fmt(r.err_cos), fmt(r.err_sin), fmt(r.err_ut)]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Linear colormap of `v in [-1, 1]` from blue (`-1`) through white to red (`+1`).
pub fn colormap(v: f64) -> (u8, u8, u8) {
    let v = if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 };
    let lerp = |a: f64, b: f64, s: f64| (a + (b - a) * s).round() as u8;
    if v < 0.0 {
        let s = v + 1.0;
        (lerp(0.0, 255.0, s), lerp(0.0, 255.0, s), 255)
    } else {
        (255, lerp(255.0, 0.0, v), lerp(255.0, 0.0, v))
    }
}

/// Render `cos u = cos^2(u/2) - sin^2(u/2)` on an `nx x nt` grid.
///
/// `values[ix][it]` holds the samples (or `None` for failed nodes, drawn
/// grey).  Time increases upwards, `x` to the right; cells are emitted
/// row-major from the top row.
pub fn heatmap_svg(values: &[Vec<Option<WaveSample>>], svg: &SvgSpec) -> String {
    let nx = values.len();
    let nt = values.first().map_or(0, Vec::len);
    let (cw, ch) = (svg.cell_width, svg.cell_height);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        cw * nx as f64,
        ch * nt as f64,
        cw * nx as f64,
        ch * nt as f64
    );
    for row in 0..nt {
        let it = nt - 1 - row;
        for (ix, col) in values.iter().enumerate() {
            let fill = match col[it] {
                Some(s) => {
                    let (r, g, b) = colormap(s.cos_half * s.cos_half - s.sin_half * s.sin_half);
                    format!("#{r:02x}{g:02x}{b:02x}")
                }
                None => "#808080".to_string(),
            };
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{cw}" height="{ch}" fill="{fill}"/>"#,
                cw * ix as f64,
                ch * row as f64
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
