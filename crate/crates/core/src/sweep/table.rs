//! CSV and JSON result files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SweepOutcome, SweepRecord};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 12] =
    ["snr_db", "bound_kind", "value", "std_error", "units", "tau", "users", "antennas", "rx", "seed", "n_samples", "runtime_s"];

const SIG_DIGITS: usize = 12;

/// One parsed CSV line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub snr_db: f64,
    pub bound_kind: String,
    pub value: f64,
    pub std_error: f64,
    pub units: String,
    pub tau: usize,
    pub users: usize,
    pub antennas: String,
    pub rx: usize,
    pub seed: u64,
    pub n_samples: u64,
    pub runtime_s: f64,
}

impl CsvRow {
    pub fn antenna_counts(&self) -> Result<Vec<usize>> {
        self.antennas
            .split(';')
            .map(|a| a.parse().map_err(|_| Error::Config(format!("bad antenna list '{}'", self.antennas))))
            .collect()
    }
}

/// Decimal text with `digits` significant digits, trailing zeros trimmed;
/// scientific notation outside [1e-5, 1e15).
fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&exp) {
        return format!("{:.*e}", digits - 1, x);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn sorted(records: &[SweepRecord]) -> Vec<&SweepRecord> {
    let mut rows: Vec<&SweepRecord> = records.iter().collect();
    rows.sort_by(|a, b| {
        a.kind
            .as_str()
            .cmp(b.kind.as_str())
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.cfg.tau.cmp(&b.cfg.tau))
            .then(a.cfg.per_user_antennas.cmp(&b.cfg.per_user_antennas))
            .then(a.cfg.rx_antennas.cmp(&b.cfg.rx_antennas))
    });
    rows
}

/// The CSV text for `records`; rows ordered by bound kind, then SNR.
pub fn csv_string(records: &[SweepRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Config("no results to write".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |source| Error::Csv { path: "<memory>".into(), source };
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in sorted(records) {
        let antennas: Vec<String> = r.cfg.per_user_antennas.iter().map(|a| a.to_string()).collect();
        w.write_record([
            fmt_sig(r.snr_db, SIG_DIGITS),
            r.kind.as_str().to_string(),
            fmt_sig(r.value(), SIG_DIGITS),
            fmt_sig(r.std_error(), SIG_DIGITS),
            r.units.as_str().to_string(),
            r.cfg.tau.to_string(),
            r.cfg.users().to_string(),
            antennas.join(";"),
            r.cfg.rx_antennas.to_string(),
            r.seed.to_string(),
            r.n_samples().to_string(),
            fmt_sig(r.runtime_seconds(), 6),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io { path: "<memory>".into(), source: e.into_error() })?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

pub fn emit_csv(records: &[SweepRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = csv_string(records)?;
    write_file(path, text.as_bytes())
}

pub fn parse_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|source| Error::Csv { path: path.into(), source })?;
    let header = reader.headers().map_err(|source| Error::Csv { path: path.into(), source })?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!("{}: unexpected CSV header", path.display())));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|source| Error::Csv { path: path.into(), source }))
        .collect()
}

/// The whole outcome (spec plus every record with its full estimate).
pub fn emit_json(outcome: &SweepOutcome, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(outcome).map_err(|source| Error::Json { path: path.into(), source })?;
    write_file(path, text.as_bytes())
}

pub(super) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)
}
