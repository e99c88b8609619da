//! Sweep driver: evaluates bounds over an SNR grid and writes CSV/JSON/SVG.
//!
//! Exit codes: 0 all points succeeded, 2 some points failed, 1 bad configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use macbounds::capacity_ub::BoundKind;
use macbounds::sweep::{
    csv_string, emit_csv, emit_json, emit_plot, parse_bounds, run_sweep, PlotStyle, SnrList, SweepManifest, Units,
};
use macbounds::Error;

#[derive(Parser, Debug)]
#[command(name = "macbounds", version, about = "Capacity bounds for noncoherent block-fading multiple-access channels")]
struct Cli {
    /// JSON manifest with flat keys (snr_db, tau, users, antennas, rx, bounds, seed, ...); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// SNR points in dB: "0,10,20" or "start:step:stop".
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    #[arg(long)]
    tau: Option<usize>,
    /// Number of single-antenna users.
    #[arg(long)]
    users: Option<usize>,
    /// Per-user transmit antennas, e.g. "1,2,1".
    #[arg(long, value_delimiter = ',')]
    antennas: Option<Vec<usize>>,
    /// Receive antennas.
    #[arg(long)]
    rx: Option<usize>,
    /// Comma list of ub_general, ub_square, ub_csi, lb_ustm, lb_gauss, lb_2user.
    #[arg(long)]
    bounds: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["nats", "bits"])]
    units: Option<String>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
    #[arg(long)]
    out_svg: Option<PathBuf>,
    /// Directory holding the Monte-Carlo constant cache.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Outer Monte-Carlo samples of the lower bounds.
    #[arg(long)]
    samples_outer: Option<usize>,
    /// Inner Monte-Carlo samples of the lower bounds.
    #[arg(long)]
    samples_inner: Option<usize>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Write runtime_s = 0 so repeated runs give byte-identical files.
    #[arg(long)]
    no_timing: bool,
    /// Report block lower bounds per coherence block instead of per channel use.
    #[arg(long)]
    per_block: bool,
}

impl Cli {
    fn manifest(&self) -> macbounds::Result<SweepManifest> {
        let bounds: Option<Vec<BoundKind>> = self.bounds.as_deref().map(parse_bounds).transpose()?;
        let units: Option<Units> = self.units.as_deref().map(str::parse).transpose()?;
        Ok(SweepManifest {
            snr_db: self.snr_db.clone().map(SnrList::Text),
            tau: self.tau,
            users: self.users,
            antennas: self.antennas.clone(),
            rx: self.rx,
            bounds,
            seed: self.seed,
            units,
            out_csv: self.out_csv.clone(),
            out_json: self.out_json.clone(),
            out_svg: self.out_svg.clone(),
            cache_dir: self.cache_dir.clone(),
            samples_outer: self.samples_outer,
            samples_inner: self.samples_inner,
            per_block: self.per_block.then_some(true),
            no_timing: self.no_timing.then_some(true),
            ..Default::default()
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let config_error = |e: Error| {
        eprintln!("macbounds: {e}");
        ExitCode::from(1)
    };
    let file = match &cli.config {
        Some(p) => match SweepManifest::load(p) {
            Ok(m) => m,
            Err(e) => return config_error(e),
        },
        None => SweepManifest::default(),
    };
    let spec = match cli.manifest().and_then(|over| file.overlay(over).into_spec()) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return config_error(Error::Config(format!("cannot start {n} threads: {e}")));
        }
    }

    let outcome = match run_sweep(&spec) {
        Ok(o) => o,
        Err(e) => return config_error(e),
    };
    for r in outcome.failures() {
        eprintln!("macbounds: {} at {} dB failed: {}", r.kind, r.snr_db, r.error.as_deref().unwrap_or("unknown error"));
    }

    let written = (|| {
        match &spec.out_csv {
            Some(p) => emit_csv(&outcome.records, p)?,
            None => print!("{}", csv_string(&outcome.records)?),
        }
        if let Some(p) = &spec.out_json {
            emit_json(&outcome, p)?;
        }
        if let Some(p) = &spec.out_svg {
            emit_plot(&outcome.records, &PlotStyle::default(), p)?;
        }
        Ok::<_, Error>(())
    })();
    if let Err(e) = written {
        eprintln!("macbounds: {e}");
        return ExitCode::from(2);
    }
    if outcome.all_succeeded() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
