//! Flat-key experiment manifests: the JSON config file and CLI overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{SweepSpec, Units};
use crate::capacity_ub::BoundKind;
use crate::config::ChannelConfig;
use crate::error::{Error, Result};

/// Every key is optional; unset keys fall back to the defaults of
/// [`SweepManifest::into_spec`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepManifest {
    /// Comma list ("0,10,20"), range ("0:5:30"), or a JSON array.
    pub snr_db: Option<SnrList>,
    pub tau: Option<usize>,
    /// Number of single-antenna users; ignored when `antennas` is set.
    pub users: Option<usize>,
    pub antennas: Option<Vec<usize>>,
    pub rx: Option<usize>,
    pub bounds: Option<Vec<BoundKind>>,
    pub seed: Option<u64>,
    pub units: Option<Units>,
    pub out_csv: Option<PathBuf>,
    pub out_json: Option<PathBuf>,
    pub out_svg: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub samples_outer: Option<usize>,
    pub samples_inner: Option<usize>,
    pub quad_points: Option<usize>,
    pub samples_csi: Option<usize>,
    pub samples_constants: Option<usize>,
    /// Report the block lower bounds per coherence block instead of per use.
    pub per_block: Option<bool>,
    /// Write runtime_s = 0 so output files are byte-reproducible.
    pub no_timing: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrList {
    Values(Vec<f64>),
    Text(String),
}

impl SnrList {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        match self {
            SnrList::Values(v) => Ok(v.clone()),
            SnrList::Text(s) => parse_snr_list(s),
        }
    }
}

/// "a,b,c" or "start:step:stop" (inclusive of stop up to rounding).
pub fn parse_snr_list(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse SNR list '{s}'"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    if s.contains(':') {
        let parts: Vec<f64> = s.split(':').map(num).collect::<Result<_>>()?;
        let [start, step, stop] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || stop < start {
            return Err(Error::Config(format!("SNR range '{s}' needs step > 0 and stop >= start")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return Err(Error::Config(format!("SNR range '{s}' has too many points")));
        }
        Ok((0..count).map(|i| start + i as f64 * step).collect())
    } else {
        s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect()
    }
}

pub fn parse_bounds(s: &str) -> Result<Vec<BoundKind>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(|t| t.trim().parse()).collect()
}

impl SweepManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
    }

    /// Keys set in `over` replace those in `self`.
    pub fn overlay(self, over: SweepManifest) -> SweepManifest {
        macro_rules! pick {
            ($($f:ident),*) => { SweepManifest { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            snr_db, tau, users, antennas, rx, bounds, seed, units, out_csv, out_json, out_svg, cache_dir, samples_outer,
            samples_inner, quad_points, samples_csi, samples_constants, per_block, no_timing
        )
    }

    /// Builds and validates the sweep. Defaults: four single-antenna users,
    /// four receive antennas, τ = 10, 0:5:30 dB, ub_square and lb_ustm.
    pub fn into_spec(self) -> Result<SweepSpec> {
        let antennas = match (self.antennas, self.users) {
            (Some(a), Some(k)) if a.len() != k => {
                return Err(Error::Config(format!("--users {k} disagrees with {} antenna entries", a.len())))
            }
            (Some(a), _) => a,
            (None, k) => vec![1; k.unwrap_or(4)],
        };
        let cfg = ChannelConfig::new(self.tau.unwrap_or(10), antennas, self.rx.unwrap_or(4))?;
        let snr_db = match self.snr_db {
            Some(l) => l.resolve()?,
            None => parse_snr_list("0:5:30")?,
        };
        let bounds = self.bounds.unwrap_or_else(|| vec![BoundKind::UbSquare, BoundKind::LbUstm]);
        let mut spec = SweepSpec::new(cfg, snr_db, bounds);
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        spec.units = self.units.unwrap_or_default();
        spec.out_csv = self.out_csv;
        spec.out_json = self.out_json;
        spec.out_svg = self.out_svg;
        spec.cache_dir = self.cache_dir;
        spec.record_runtime = !self.no_timing.unwrap_or(false);
        let b = &mut spec.budgets;
        if let Some(v) = self.samples_outer {
            b.outer_samples = v;
        }
        if let Some(v) = self.samples_inner {
            b.inner_samples = v;
        }
        if let Some(v) = self.quad_points {
            b.quad_points = v;
        }
        if let Some(v) = self.samples_csi {
            b.csi_samples = v;
        }
        if let Some(v) = self.samples_constants {
            b.saddle.constant_samples = v;
        }
        b.divide_by_tau = !self.per_block.unwrap_or(false);
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_lists() {
        assert_eq!(parse_snr_list("0,10, 20").unwrap(), vec![0.0, 10.0, 20.0]);
        assert_eq!(parse_snr_list("0:5:30").unwrap(), vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]);
        assert_eq!(parse_snr_list("0:0.1:0.3").unwrap().len(), 4);
        assert!(parse_snr_list("0:0:3").is_err());
        assert!(parse_snr_list("a,b").is_err());
        assert!(parse_snr_list("1:2").is_err());
    }

    #[test]
    fn file_keys_and_overrides() {
        let file: SweepManifest =
            serde_json::from_str(r#"{"tau": 4, "users": 2, "rx": 2, "snr_db": "0:10:20", "bounds": ["ub_csi", "lb_2user"], "seed": 9}"#)
                .unwrap();
        let over = SweepManifest { seed: Some(11), units: Some(Units::Bits), ..Default::default() };
        let spec = file.overlay(over).into_spec().unwrap();
        assert_eq!(spec.cfg, ChannelConfig::single_antenna(2, 2, 4).unwrap());
        assert_eq!(spec.snr_db, vec![0.0, 10.0, 20.0]);
        assert_eq!(spec.seed, 11);
        assert_eq!(spec.units, Units::Bits);
        assert!(spec.bounds.contains(&BoundKind::Lb2user));
        assert!(serde_json::from_str::<SweepManifest>(r#"{"taus": 4}"#).is_err());
        let arr: SweepManifest = serde_json::from_str(r#"{"snr_db": [0, 3]}"#).unwrap();
        assert_eq!(arr.snr_db.unwrap().resolve().unwrap(), vec![0.0, 3.0]);
    }

    #[test]
    fn inconsistent_users() {
        let m = SweepManifest { users: Some(3), antennas: Some(vec![1, 2]), ..Default::default() };
        assert!(matches!(m.into_spec(), Err(Error::Config(_))));
        let m = SweepManifest { bounds: Some(vec![]), ..Default::default() };
        assert!(m.into_spec().is_err());
    }
}
