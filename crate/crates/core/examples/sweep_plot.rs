//! A full SNR sweep written as CSV, JSON and an SVG plot.
//!
//! cargo run --release --example sweep_plot [out_dir]

use std::path::PathBuf;

use macbounds::capacity_ub::BoundKind;
use macbounds::config::ChannelConfig;
use macbounds::sweep::{emit_csv, emit_json, emit_plot, run_sweep, PlotStyle, SweepSpec, Units};

fn main() -> macbounds::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sweep_out".into()));
    let cfg = ChannelConfig::single_antenna(2, 2, 10)?;
    let snr: Vec<f64> = (0..=6).map(|i| 5.0 * i as f64).collect();
    let mut spec = SweepSpec::new(cfg, snr, [BoundKind::UbSquare, BoundKind::UbCsi, BoundKind::LbUstm, BoundKind::LbGauss]);
    spec.units = Units::Bits;
    spec.budgets.outer_samples = 2000;
    spec.budgets.inner_samples = 200;
    spec.budgets.csi_samples = 20_000;

    let outcome = run_sweep(&spec)?;
    for r in &outcome.records {
        println!("{:<10} {:>5} dB  {:.4} ± {:.4} bits", r.kind, r.snr_db, r.value(), r.std_error());
    }
    emit_csv(&outcome.records, out.join("bounds.csv"))?;
    emit_json(&outcome, out.join("bounds.json"))?;
    let style = PlotStyle { title: Some("K = 2, r = 2, τ = 10".into()), ..PlotStyle::default() };
    emit_plot(&outcome.records, &style, out.join("bounds.svg"))?;
    println!("wrote {}/bounds.{{csv,json,svg}}", out.display());
    Ok(())
}
