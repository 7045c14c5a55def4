use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fit::{FitWindow, RateFit};
use super::sweep::{RateRow, RateTable};
use super::TheoremTargets;
use crate::error::{Error, Result};

const CSV_FORMAT_OSC_SEP: char = ';';

fn argmax_columns(table: &RateTable) -> usize {
    table.rows.iter().map(|r| r.argmax_xp.len()).max().unwrap_or(1).max(1)
}

/// CSV text of a rate table. Floats use the shortest round-trip form, so a
/// table read back with [`read_rate_csv`] is bit-identical.
pub fn rate_csv(table: &RateTable) -> String {
    let m = argmax_columns(table);
    let mut s = String::from("epsilon,max_grad_neck,max_grad_global");
    for k in 0..m {
        let _ = write!(s, ",argmax_x{}", k + 1);
    }
    s.push_str(",osc,converged,iters,grid_ns,grid_nt,energy\n");
    for r in &table.rows {
        let _ = write!(s, "{},{},{}", r.epsilon, r.max_grad_neck, r.max_grad_global);
        for k in 0..m {
            let _ = write!(s, ",{}", r.argmax_xp.get(k).copied().unwrap_or(f64::NAN));
        }
        let osc: Vec<String> = r.osc.iter().map(|(a, b)| format!("{a}:{b}")).collect();
        let _ = writeln!(
            s,
            ",{},{},{},{},{},{}",
            osc.join(&CSV_FORMAT_OSC_SEP.to_string()),
            r.converged,
            r.iters,
            r.grid_ns,
            r.grid_nt,
            r.energy
        );
    }
    s
}

pub fn write_rate_csv(table: &RateTable, path: &Path) -> Result<()> {
    std::fs::write(path, rate_csv(table)).map_err(|e| Error::io(path, e))
}

fn parse_f64(field: &str, what: &str, line: usize) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::config(format!("line {line}: bad {what} value {field:?}")))
}

/// Reads a table written by [`write_rate_csv`]. Geometry and configuration
/// descriptors are not part of the CSV and come back as null.
pub fn parse_rate_csv(text: &str) -> Result<RateTable> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::config("empty CSV"))?.split(',').collect();
    let m = header.iter().filter(|h| h.starts_with("argmax_x")).count();
    let expected = 3 + m + 6;
    if header.len() != expected || header[0] != "epsilon" || header[3 + m] != "osc" {
        return Err(Error::config(format!("unexpected CSV header {:?}", header.join(","))));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let ln = i + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != expected {
            return Err(Error::config(format!("line {ln}: expected {expected} fields, got {}", f.len())));
        }
        let osc = if f[3 + m].is_empty() {
            Vec::new()
        } else {
            f[3 + m]
                .split(CSV_FORMAT_OSC_SEP)
                .map(|pair| {
                    let (a, b) = pair.split_once(':').ok_or_else(|| Error::config(format!("line {ln}: bad osc entry {pair:?}")))?;
                    Ok((parse_f64(a, "osc radius", ln)?, parse_f64(b, "osc", ln)?))
                })
                .collect::<Result<_>>()?
        };
        let int = |s: &str, what: &str| s.trim().parse::<usize>().map_err(|_| Error::config(format!("line {ln}: bad {what} {s:?}")));
        rows.push(RateRow {
            epsilon: parse_f64(f[0], "epsilon", ln)?,
            max_grad_neck: parse_f64(f[1], "max_grad_neck", ln)?,
            max_grad_global: parse_f64(f[2], "max_grad_global", ln)?,
            argmax_xp: (0..m).map(|k| parse_f64(f[3 + k], "argmax", ln)).collect::<Result<_>>()?,
            osc,
            converged: f[4 + m].trim().parse().map_err(|_| Error::config(format!("line {ln}: bad converged flag")))?,
            iters: int(f[5 + m], "iters")?,
            grid_ns: int(f[6 + m], "grid_ns")?,
            grid_nt: int(f[7 + m], "grid_nt")?,
            energy: parse_f64(f[8 + m], "energy", ln)?,
        });
    }
    Ok(RateTable { rows, geometry: serde_json::Value::Null, config: serde_json::Value::Null })
}

pub fn read_rate_csv(path: &Path) -> Result<RateTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rate_csv(&text)
}

/// Sweep manifest stored next to the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: String,
    pub config_hash: String,
    pub created_unix: u64,
    pub geometry: serde_json::Value,
    pub config: serde_json::Value,
    pub rows: usize,
    pub converged_rows: usize,
    pub targets: Option<TheoremTargets>,
    pub fit_window: Option<FitWindow>,
    pub fit: Option<RateFit>,
}

impl Manifest {
    pub fn new(table: &RateTable, config_hash: &str) -> Self {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Manifest {
            format: "pgap-sweep/1".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash.into(),
            created_unix,
            geometry: table.geometry.clone(),
            config: table.config.clone(),
            rows: table.rows.len(),
            converged_rows: table.converged_rows().count(),
            targets: None,
            fit_window: None,
            fit: None,
        }
    }
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// The data drawn by [`rate_svg`], in log10 coordinates: one `point` row per
/// ε and the two end points of the fitted line.
pub fn rate_plot_csv(table: &RateTable, fit: Option<&RateFit>) -> String {
    let mut s = String::from("series,log10_inv_eps,log10_max_grad,converged\n");
    let mut xs = Vec::new();
    for r in table.rows.iter().filter(|r| r.max_grad_neck > 0.0) {
        let x = (1.0 / r.epsilon).log10();
        xs.push(x);
        let _ = writeln!(s, "point,{x},{},{}", r.max_grad_neck.log10(), r.converged);
    }
    if let (Some(f), Some(lo), Some(hi)) = (fit, xs.iter().copied().reduce(f64::min), xs.iter().copied().reduce(f64::max)) {
        for x in [lo, hi] {
            let y = (f.intercept + f.slope * x * std::f64::consts::LN_10) / std::f64::consts::LN_10;
            let _ = writeln!(s, "fit,{x},{y},");
        }
    }
    s
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Log–log plot of max|Du| in the neck against 1/ε with the fitted line and
/// the band between the lower and upper target slopes through the data
/// centroid.
pub fn rate_svg(table: &RateTable, fit: Option<&RateFit>, targets: &TheoremTargets) -> String {
    let pts: Vec<(f64, f64, bool)> = table
        .rows
        .iter()
        .filter(|r| r.max_grad_neck > 0.0)
        .map(|r| ((1.0 / r.epsilon).log10(), r.max_grad_neck.log10(), r.converged))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    if pts.is_empty() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, W / 2.0, H / 2.0);
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (mut y0, mut y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let pad = |a: &mut f64, b: &mut f64| {
        let d = (*b - *a).max(0.2) * 0.15;
        *a -= d;
        *b += d;
    };
    pad(&mut x0, &mut x1);
    pad(&mut y0, &mut y1);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let (cx, cy) = {
        let n = pts.len() as f64;
        (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n)
    };

    let _ = writeln!(svg, r#"<clipPath id="plot"><rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}"/></clipPath>"#, W - 2.0 * MARGIN, H - 2.0 * MARGIN);
    let (lo, hi) = targets.band();
    let band = [(x0, cy + lo * (x0 - cx)), (x1, cy + lo * (x1 - cx)), (x1, cy + hi * (x1 - cx)), (x0, cy + hi * (x0 - cx))];
    let poly: Vec<String> = band.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let _ = writeln!(
        svg,
        r##"<polygon class="target-band" clip-path="url(#plot)" points="{}" fill="#9ecae1" fill-opacity="0.4" stroke="none"><title>target slopes [{lo}, {hi}]</title></polygon>"##,
        poly.join(" ")
    );
    if let Some(f) = fit {
        // fit is in natural logs; the slope is the same in log10
        let at = |x: f64| (f.intercept + f.slope * x * std::f64::consts::LN_10) / std::f64::consts::LN_10;
        let _ = writeln!(
            svg,
            r##"<line class="fit" clip-path="url(#plot)" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d62728" stroke-width="2"><title>slope {:.4} ± {:.4}</title></line>"##,
            sx(x0),
            sy(at(x0)),
            sx(x1),
            sy(at(x1)),
            f.slope,
            f.stderr
        );
    }
    for &(x, y, ok) in &pts {
        let fill = if ok { "#1f77b4" } else { "none" };
        let _ = writeln!(svg, r##"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="{fill}" stroke="#1f77b4"/>"##, sx(x), sy(y));
    }
    // axes and ticks
    let _ = writeln!(
        svg,
        r#"<path d="M{m},{m} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{:.2}</text>"#, sx(xv), H - MARGIN + 16.0, xv);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{:.2}</text>"#, MARGIN - 6.0, sy(yv) + 4.0, yv);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">log10(1/epsilon)</text>"#, W / 2.0, H - 15.0);
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">log10 max |Du| (neck)</text>"#,
        H / 2.0,
        H / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}
