use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::{CellResult, TrialStatus};

/// One row per trial. Wall-clock time is left out so the file is a pure
/// function of the configuration.
pub fn write_csv_to<W: Write>(cells: &[CellResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n_total",
        "n_l",
        "n_s",
        "q",
        "sigma",
        "trial",
        "seed",
        "relative_error",
        "status",
        "iters",
        "aggregation",
        "cell_aggregate",
    ])?;
    for c in cells {
        let n_l = c.n_total / 2;
        for t in &c.trials {
            let status = match t.status {
                TrialStatus::Converged => "converged",
                TrialStatus::NotConverged => "not_converged",
                TrialStatus::Failed => "failed",
            };
            w.write_record([
                c.n_total.to_string(),
                n_l.to_string(),
                (c.n_total - n_l).to_string(),
                c.q.to_string(),
                c.sigma.to_string(),
                t.trial.to_string(),
                t.seed.to_string(),
                t.relative_error.to_string(),
                status.to_string(),
                t.iters.to_string(),
                c.aggregation.name().to_string(),
                c.aggregate.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(cells: &[CellResult], path: &Path) -> Result<()> {
    write_csv_to(cells, std::fs::File::create(path)?)
}

/// Gray level for an aggregate error: 255 (white) at 0, 0 (black) at 1 and
/// above.
pub fn gray_level(aggregate: f64) -> u8 {
    let a = if aggregate.is_nan() { 1.0 } else { aggregate.clamp(0.0, 1.0) };
    (255.0 * (1.0 - a)).round() as u8
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Heatmap with `q` on the horizontal axis and `n_total` on the vertical
/// axis (largest at the top). Cells sharing `(n_total, q)` across noise
/// levels are averaged.
pub fn heatmap_svg(cells: &[CellResult]) -> Result<String> {
    if cells.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    let qs = sorted_unique(cells.iter().map(|c| c.q).collect());
    let mut ns: Vec<usize> = cells.iter().map(|c| c.n_total).collect();
    ns.sort_unstable();
    ns.dedup();
    let (cw, ch) = (40.0, 40.0);
    let (left, top) = (80.0, 30.0);
    let width = left + cw * qs.len() as f64 + 20.0;
    let height = top + ch * ns.len() as f64 + 70.0;

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (row, &n) in ns.iter().rev().enumerate() {
        for (col, &q) in qs.iter().enumerate() {
            let vals: Vec<f64> = cells.iter().filter(|c| c.n_total == n && c.q == q).map(|c| c.aggregate).collect();
            if vals.is_empty() {
                continue;
            }
            let agg = vals.iter().sum::<f64>() / vals.len() as f64;
            let g = gray_level(agg);
            writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{cw}" height="{ch}" fill="rgb({g},{g},{g})" stroke="gray" stroke-width="0.5"><title>n={n} q={q} error={agg}</title></rect>"#,
                left + cw * col as f64,
                top + ch * row as f64
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{n}</text>"#,
            left - 6.0,
            top + ch * row as f64 + ch / 2.0 + 4.0
        )
        .unwrap();
    }
    let base = top + ch * ns.len() as f64;
    for (col, &q) in qs.iter().enumerate() {
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{q:.2}</text>"#,
            left + cw * col as f64 + cw / 2.0,
            base + 16.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">corruption probability q</text>"#,
        left + cw * qs.len() as f64 / 2.0,
        base + 40.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">n_total</text>"#,
        top + ch * ns.len() as f64 / 2.0,
        top + ch * ns.len() as f64 / 2.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes the heatmap SVG to `path` and the raw numbers to a `.csv` sidecar
/// next to it.
pub fn emit_heatmap(cells: &[CellResult], path: &Path) -> Result<()> {
    let svg = heatmap_svg(cells)?;
    std::fs::write(path, svg)?;
    write_csv(cells, &path.with_extension("csv"))
}

/// Log–log plot of aggregate error against `sigma > 0`.
pub fn noise_plot_svg(cells: &[CellResult]) -> Result<String> {
    let pts: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.sigma > 0.0)
        .map(|c| (c.sigma.log10(), c.aggregate.max(1e-16).log10()))
        .collect();
    if pts.is_empty() {
        return Err(Error::InvalidParameter("noise plot needs at least one sigma > 0".into()));
    }
    let (x0, x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (y0, y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let (x0, x1, y0, y1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0), y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let (w, h, m) = (480.0, 360.0, 60.0);
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - m, w - m, h - m).unwrap();
    writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m).unwrap();
    for e in (x0 as i32)..=(x1 as i32) {
        writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">1e{e}</text>"#, sx(e as f64), h - m + 16.0).unwrap();
    }
    for e in (y0 as i32)..=(y1 as i32) {
        writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">1e{e}</text>"#, m - 6.0, sy(e as f64) + 4.0).unwrap();
    }
    let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    writeln!(s, r#"<polyline fill="none" stroke="black" stroke-width="1.5" points="{}"/>"#, path.join(" ")).unwrap();
    for &(x, y) in &pts {
        writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="black"/>"#, sx(x), sy(y)).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">noise sigma</text>"#, w / 2.0, h - 18.0).unwrap();
    writeln!(s, r#"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">relative error</text>"#, h / 2.0, h / 2.0).unwrap();
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_noise_plot(cells: &[CellResult], path: &Path) -> Result<()> {
    std::fs::write(path, noise_plot_svg(cells)?)?;
    write_csv(cells, &path.with_extension("csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Aggregation, TrialResult};

    fn cell(n_total: usize, q: f64, aggregate: f64) -> CellResult {
        CellResult {
            n_total,
            q,
            sigma: 0.0,
            aggregation: Aggregation::Mean,
            aggregate,
            trials: vec![TrialResult {
                trial: 0,
                seed: 1,
                relative_error: aggregate,
                status: TrialStatus::Converged,
                iters: 10,
                message: None,
                wall_ms: 0.0,
            }],
            wall_ms: 0.0,
        }
    }

    #[test]
    fn gray_levels_are_monotone_and_clamped() {
        assert_eq!(gray_level(0.0), 255);
        assert_eq!(gray_level(1.0), 0);
        assert_eq!(gray_level(1.5), 0);
        assert_eq!(gray_level(-0.2), 255);
        let mut prev = 255;
        for k in 0..=100 {
            let g = gray_level(k as f64 / 80.0);
            assert!(g <= prev);
            prev = g;
        }
    }

    #[test]
    fn single_white_cell() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.svg");
        emit_heatmap(&[cell(10, 0.0, 0.0)], &path).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert_eq!(svg.matches("fill=\"rgb(").count(), 1);
        assert!(svg.contains("rgb(255,255,255)"));
        let csv = std::fs::read_to_string(path.with_extension("csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn large_error_renders_black_but_keeps_value() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.svg");
        emit_heatmap(&[cell(10, 0.5, 1.5)], &path).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().contains("rgb(0,0,0)"));
        let csv = std::fs::read_to_string(path.with_extension("csv")).unwrap();
        assert!(csv.lines().nth(1).unwrap().ends_with(",1.5"));
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(heatmap_svg(&[]).is_err());
    }
}
