//! Fixed-size SVG charts drawn from a run directory's CSV files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn frame(out: &mut String, title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>
<line x1="{MARGIN}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{b}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>
"#,
        WIDTH / 2.0,
        escape(title),
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(xlabel),
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel),
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let py = HEIGHT - MARGIN - f * (HEIGHT - 2.0 * MARGIN);
        let px = MARGIN + f * (WIDTH - 2.0 * MARGIN);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            MARGIN - 4.0,
            py + 4.0,
            y.0 + f * (y.1 - y.0)
        );
        let _ = writeln!(
            out,
            r#"<text x="{px:.1}" y="{}" text-anchor="middle">{:.4}</text>"#,
            HEIGHT - MARGIN + 16.0,
            x.0 + f * (x.1 - x.0)
        );
    }
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{}" y="{:.1}">{}</text>"#,
            WIDTH - MARGIN - 120.0,
            y,
            PALETTE[i % PALETTE.len()],
            WIDTH - MARGIN - 106.0,
            y + 9.0,
            escape(name)
        );
    }
}

pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let x = range(all().map(|p| p.0));
    let y = range(all().map(|p| p.1));
    let sx = |v: f64| MARGIN + (v - x.0) / (x.1 - x.0) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - y.0) / (y.1 - y.0) * (HEIGHT - 2.0 * MARGIN);
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel, x, y);
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s.points.iter().map(|&(a, b)| format!("{:.2},{:.2}", sx(a), sy(b))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            pts.join(" ")
        );
    }
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}

/// Grouped bars: `values[g][s]` is series `s` in group `g`.
pub fn bar_chart(title: &str, xlabel: &str, ylabel: &str, groups: &[String], names: &[&str], values: &[Vec<f64>]) -> String {
    let y = (0.0, range(values.iter().flatten().copied()).1.max(1e-9));
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel, (0.0, groups.len() as f64), y);
    let slot = (WIDTH - 2.0 * MARGIN) / groups.len().max(1) as f64;
    let bar = slot * 0.8 / names.len().max(1) as f64;
    for (g, row) in values.iter().enumerate() {
        for (s, &v) in row.iter().enumerate() {
            let h = v / y.1 * (HEIGHT - 2.0 * MARGIN);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                MARGIN + slot * g as f64 + slot * 0.1 + bar * s as f64,
                HEIGHT - MARGIN - h,
                bar,
                h,
                PALETTE[s % PALETTE.len()]
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle" font-size="10">{}</text>"#,
            MARGIN + slot * (g as f64 + 0.5),
            HEIGHT - MARGIN + 28.0,
            escape(&groups[g])
        );
    }
    legend(&mut out, names);
    out.push_str("</svg>\n");
    out
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let header = r
            .headers()
            .map_err(|e| Error::Format(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Ok(Table { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("missing column {name}")))
    }

    fn num(&self, row: usize, col: usize) -> Result<f64> {
        self.rows[row][col].parse().map_err(|_| Error::Parse {
            line: row + 2,
            message: format!("`{}` is not a number", self.rows[row][col]),
        })
    }
}

/// Renders `gen_gap.svg`, `cer.svg` and `layers.svg` from the CSVs in `dir`.
pub fn plot_run_dir(dir: &Path) -> Result<()> {
    let curves = Table::read(&dir.join("curves.csv"))?;
    let (it, tr, va) = (curves.col("global_iter")?, curves.col("train_acc")?, curves.col("val_acc")?);
    let gap = (0..curves.rows.len())
        .map(|r| Ok((curves.num(r, it)?, 100.0 * (curves.num(r, tr)? - curves.num(r, va)?))))
        .collect::<Result<Vec<_>>>()?;
    let run = curves.rows.first().map_or("run".to_string(), |r| r[0].clone());
    fs::write(
        dir.join("gen_gap.svg"),
        line_chart(
            "Generalization gap",
            "training iterations",
            "train - val accuracy (pp)",
            &[Series { name: run.clone(), points: gap }],
        ),
    )?;

    let mb = Table::read(&dir.join("megabatches.csv"))?;
    let (m, e) = (mb.col("megabatch")?, mb.col("test_errors")?);
    let mut total = 0.0;
    let mut cer = Vec::with_capacity(mb.rows.len());
    for r in 0..mb.rows.len() {
        total += mb.num(r, e)?;
        cer.push((mb.num(r, m)?, total));
    }
    fs::write(
        dir.join("cer.svg"),
        line_chart("Cumulative error", "megabatch", "CER", &[Series { name: run, points: cer }]),
    )?;

    let layer_cols: Vec<(usize, &str)> = mb
        .header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("pruned_frac_").map(|n| (i, n)))
        .collect();
    let groups: Vec<String> = mb.rows.iter().map(|r| r[m].clone()).collect();
    let values = (0..mb.rows.len())
        .map(|r| layer_cols.iter().map(|&(c, _)| mb.num(r, c)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<&str> = layer_cols.iter().map(|&(_, n)| n).collect();
    fs::write(
        dir.join("layers.svg"),
        bar_chart("Pruned fraction per layer", "megabatch", "pruned fraction", &groups, &names, &values),
    )?;
    Ok(())
}
