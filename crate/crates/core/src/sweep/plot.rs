//! Self-contained SVG line plots of sweep results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::SweepRecord;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PlotStyle {
    pub width: f64,
    pub height: f64,
    pub title: Option<String>,
    /// Error bars are drawn where std_error exceeds this fraction of |value|.
    pub error_bar_threshold: f64,
}

impl Default for PlotStyle {
    fn default() -> Self {
        PlotStyle { width: 720.0, height: 480.0, title: None, error_bar_threshold: 0.005 }
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 55.0); // left, right, top, bottom

struct Curve {
    label: String,
    /// (snr_db, value, std_error) for finite cells.
    points: Vec<(f64, f64, f64)>,
}

fn curves(records: &[SweepRecord]) -> Vec<Curve> {
    let distinct_cfgs = {
        let mut c: Vec<_> = records.iter().map(|r| &r.cfg).collect();
        c.sort_by_key(|c| (c.tau, c.per_user_antennas.clone(), c.rx_antennas));
        c.dedup();
        c.len()
    };
    let mut groups: BTreeMap<(String, usize, Vec<usize>, usize), Vec<(f64, f64, f64)>> = BTreeMap::new();
    for r in records {
        let key = (r.kind.as_str().to_string(), r.cfg.tau, r.cfg.per_user_antennas.clone(), r.cfg.rx_antennas);
        let pts = groups.entry(key).or_default();
        if r.value().is_finite() {
            pts.push((r.snr_db, r.value(), r.std_error()));
        }
    }
    groups
        .into_iter()
        .filter(|(_, p)| !p.is_empty())
        .map(|((kind, tau, ant, rx), mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let label = if distinct_cfgs > 1 {
                let ant: Vec<String> = ant.iter().map(|a| a.to_string()).collect();
                format!("{kind} (τ={tau}, n={}, r={rx})", ant.join("+"))
            } else {
                kind
            };
            Curve { label, points }
        })
        .collect()
}

fn bar(p: &(f64, f64, f64), style: &PlotStyle) -> Option<(f64, f64)> {
    let (_, v, se) = *p;
    (se.is_finite() && se > style.error_bar_threshold * v.abs()).then_some((v - se, v + se))
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    if span > 0.0 {
        (lo - 0.05 * span, hi + 0.05 * span)
    } else {
        let d = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - d, hi + d)
    }
}

/// Axis ranges: data extent (including drawn error bars) plus 5% per side.
pub fn plot_ranges(records: &[SweepRecord], style: &PlotStyle) -> Result<((f64, f64), (f64, f64))> {
    let cs = curves(records);
    if cs.is_empty() {
        return Err(Error::Config("nothing to plot: no finite results".into()));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in cs.iter().flat_map(|c| &c.points) {
        x0 = x0.min(p.0);
        x1 = x1.max(p.0);
        let (lo, hi) = bar(p, style).unwrap_or((p.1, p.1));
        y0 = y0.min(lo);
        y1 = y1.max(hi);
    }
    Ok((padded(x0, x1), padded(y0, y1)))
}

/// Roughly five ticks at 1/2/5 × 10^k spacing inside [lo, hi].
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// The SVG document: one polyline per (bound kind, configuration).
pub fn plot_svg(records: &[SweepRecord], style: &PlotStyle) -> Result<String> {
    let ((x0, x1), (y0, y1)) = plot_ranges(records, style)?;
    let cs = curves(records);
    let (ml, mr, mt, mb) = MARGIN;
    let (w, h) = (style.width, style.height);
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + (y1 - y) / (y1 - y0) * ph;
    let units = records.first().map_or("nats", |r| r.units.as_str());

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    if let Some(t) = &style.title {
        let _ = writeln!(s, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(t));
    }
    let _ = writeln!(s, r#"<rect x="{ml}" y="{mt}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#);
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{mt}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/>"##, mt + ph);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, mt + ph + 16.0, tick_label(t));
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(s, r##"<line x1="{ml}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, ml + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, ml - 6.0, y + 4.0, tick_label(t));
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">SNR (dB)</text>"#, ml + pw / 2.0, h - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">rate ({units} per channel use)</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0
    );

    for (i, c) in cs.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.8" points="{}"/>"#, pts.join(" "));
        for p in &c.points {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{colour}"/>"#, sx(p.0), sy(p.1));
            if let Some((lo, hi)) = bar(p, style) {
                let x = sx(p.0);
                let _ = writeln!(
                    s,
                    r#"<line class="errbar" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{colour}"/>"#,
                    sy(lo),
                    sy(hi)
                );
            }
        }
        let ly = mt + 14.0 + 16.0 * i as f64;
        let lx = ml + 10.0;
        let _ = writeln!(s, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="1.8"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&c.label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(records: &[SweepRecord], style: &PlotStyle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    super::table::write_file(path, plot_svg(records, style)?.as_bytes())
}
