//! SNR sweeps over any set of bounds, and their CSV / JSON / SVG outputs.

mod manifest;
mod plot;
mod table;

pub use manifest::{parse_bounds, parse_snr_list, SnrList, SweepManifest};
pub use plot::{emit_plot, plot_ranges, plot_svg, PlotStyle};
pub use table::{csv_string, emit_csv, emit_json, parse_csv, CsvRow, CSV_HEADER};

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity_lb::{gaussian_lb, two_user_lb, ustm_lb, LbSampleBudget};
use crate::capacity_ub::{perfect_csi_ub, saddle_solve, BoundEstimate, BoundKind, SaddleConfig, SaddleMode};
use crate::config::{ChannelConfig, McConfig};
use crate::error::{Error, Result};
use crate::randmat::ConstantCache;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    pub fn as_str(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }

    /// Converts a value in nats.
    pub fn from_nats(self, v: f64) -> f64 {
        match self {
            Units::Nats => v,
            Units::Bits => v / std::f64::consts::LN_2,
        }
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nats" => Ok(Units::Nats),
            "bits" => Ok(Units::Bits),
            _ => Err(Error::Config(format!("unknown units '{s}' (expected nats or bits)"))),
        }
    }
}

/// Sample and solver budgets shared by the bounds of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub outer_samples: usize,
    pub inner_samples: usize,
    pub quad_points: usize,
    pub csi_samples: usize,
    pub divide_by_tau: bool,
    pub saddle: SaddleConfig,
}

impl Default for Budgets {
    fn default() -> Self {
        let lb = LbSampleBudget::default();
        Budgets {
            outer_samples: lb.outer_samples,
            inner_samples: lb.inner_samples,
            quad_points: lb.quad_points,
            csi_samples: 100_000,
            divide_by_tau: true,
            saddle: SaddleConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub cfg: ChannelConfig,
    pub snr_db: Vec<f64>,
    pub bounds: BTreeSet<BoundKind>,
    pub budgets: Budgets,
    pub seed: u64,
    pub units: Units,
    /// Write wall-clock runtimes; off makes outputs byte-reproducible.
    pub record_runtime: bool,
    pub out_csv: Option<PathBuf>,
    pub out_json: Option<PathBuf>,
    pub out_svg: Option<PathBuf>,
    /// Directory of the ζ / a constant cache.
    pub cache_dir: Option<PathBuf>,
}

impl SweepSpec {
    pub fn new(cfg: ChannelConfig, snr_db: Vec<f64>, bounds: impl IntoIterator<Item = BoundKind>) -> Self {
        SweepSpec {
            cfg,
            snr_db,
            bounds: bounds.into_iter().collect(),
            budgets: Budgets::default(),
            seed: 0x5EED,
            units: Units::Nats,
            record_runtime: true,
            out_csv: None,
            out_json: None,
            out_svg: None,
            cache_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if self.snr_db.is_empty() {
            return Err(Error::Config("at least one SNR point is required".into()));
        }
        if self.snr_db.iter().any(|x| !x.is_finite()) || self.snr_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("SNR points must be finite and strictly increasing".into()));
        }
        if self.bounds.is_empty() {
            return Err(Error::Config("at least one bound must be requested".into()));
        }
        if self.bounds.contains(&BoundKind::UbSquare) && !self.cfg.is_square() {
            return Err(Error::Config("ub_square needs as many transmit as receive antennas".into()));
        }
        if self.bounds.contains(&BoundKind::Lb2user) && (self.cfg.per_user_antennas != [1, 1] || self.cfg.r() < 2) {
            return Err(Error::Config("lb_2user needs two single-antenna users and at least two receive antennas".into()));
        }
        let b = &self.budgets;
        if b.outer_samples < 2 || b.inner_samples < 1 || b.quad_points < 1 || b.csi_samples < 2 {
            return Err(Error::Config("sample budgets must be positive".into()));
        }
        Ok(())
    }

    pub fn lb_budget(&self) -> LbSampleBudget {
        LbSampleBudget {
            outer_samples: self.budgets.outer_samples,
            inner_samples: self.budgets.inner_samples,
            quad_points: self.budgets.quad_points,
            seed: self.seed,
            divide_by_tau: self.budgets.divide_by_tau,
            fresh_inner_pool: false,
        }
    }
}

/// One bound at one SNR point, in the sweep's units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub snr_db: f64,
    pub kind: BoundKind,
    pub units: Units,
    pub cfg: ChannelConfig,
    pub seed: u64,
    /// `None` for a failed cell.
    pub estimate: Option<BoundEstimate>,
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn value(&self) -> f64 {
        self.estimate.as_ref().map_or(f64::NAN, |e| e.value)
    }

    pub fn std_error(&self) -> f64 {
        self.estimate.as_ref().map_or(f64::NAN, |e| e.std_error)
    }

    pub fn n_samples(&self) -> u64 {
        self.estimate.as_ref().map_or(0, |e| e.n_samples as u64)
    }

    pub fn runtime_seconds(&self) -> f64 {
        self.estimate.as_ref().map_or(0.0, |e| e.runtime_seconds)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub spec: SweepSpec,
    /// Sorted by bound kind name, then SNR.
    pub records: Vec<SweepRecord>,
}

impl SweepOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &SweepRecord> {
        self.records.iter().filter(|r| r.estimate.is_none())
    }

    pub fn all_succeeded(&self) -> bool {
        self.failures().next().is_none()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn run_point(spec: &SweepSpec, kind: BoundKind, snr_db: f64, cache: Option<&ConstantCache>) -> Result<BoundEstimate> {
    let rho = db_to_linear(snr_db);
    let saddle = SaddleConfig { seed: spec.seed, ..spec.budgets.saddle.clone() };
    match kind {
        BoundKind::UbSquare => saddle_solve(&spec.cfg, rho, SaddleMode::Square, &saddle, None),
        BoundKind::UbGeneral => saddle_solve(&spec.cfg, rho, SaddleMode::General, &saddle, cache),
        BoundKind::UbCsi => perfect_csi_ub(&spec.cfg, rho, &McConfig::new(spec.budgets.csi_samples, spec.seed)),
        BoundKind::LbUstm => ustm_lb(&spec.cfg, rho, &spec.lb_budget()),
        BoundKind::LbGauss => gaussian_lb(&spec.cfg, rho, &spec.lb_budget()),
        BoundKind::Lb2user => two_user_lb(&spec.cfg, rho, &spec.lb_budget()),
    }
}

/// Evaluates every requested bound at every SNR point. Invalid specs fail
/// up front; a failing point is recorded and the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let cache = match &spec.cache_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
            Some(ConstantCache::open(dir.join("constants.json"))?)
        }
        None => None,
    };
    let mut jobs: Vec<(BoundKind, f64)> =
        spec.bounds.iter().flat_map(|&k| spec.snr_db.iter().map(move |&s| (k, s))).collect();
    jobs.sort_by(|a, b| a.0.as_str().cmp(b.0.as_str()).then(a.1.total_cmp(&b.1)));
    let blank = |snr_db, kind| SweepRecord {
        snr_db,
        kind,
        units: spec.units,
        cfg: spec.cfg.clone(),
        seed: spec.seed,
        estimate: None,
        error: None,
    };
    let records = jobs
        .par_iter()
        .map(|&(kind, snr_db)| match run_point(spec, kind, snr_db, cache.as_ref()) {
            Ok(mut est) => {
                est.value = spec.units.from_nats(est.value);
                est.std_error = spec.units.from_nats(est.std_error);
                if !spec.record_runtime {
                    est.runtime_seconds = 0.0;
                }
                SweepRecord { estimate: Some(est), ..blank(snr_db, kind) }
            }
            Err(e) => SweepRecord { error: Some(e.to_string()), ..blank(snr_db, kind) },
        })
        .collect();
    Ok(SweepOutcome { spec: spec.clone(), records })
}
