//! Persistent store for Monte-Carlo constants.
//!
//! One JSON object mapping keys such as `zeta:2:3` or `oconst:2:1:4:10` to
//! the estimate and the seed that produced it. Readers share a lock; a write
//! replaces the file atomically (temp file + rename) so a crash never
//! leaves a torn cache behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::McEstimate;
use crate::error::{Error, Result};

/// A cached estimate together with the seed that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CachedConstant {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub master_seed: u64,
}

impl CachedConstant {
    pub fn estimate(&self) -> McEstimate {
        McEstimate { mean: self.mean, std_error: self.std_error, n_samples: self.n_samples }
    }
}

#[derive(Debug, Default)]
pub struct ConstantCache {
    path: Option<PathBuf>,
    entries: RwLock<BTreeMap<String, CachedConstant>>,
}

impl ConstantCache {
    /// A cache that is never written to disk.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists; later inserts are persisted there.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let entries = if path.exists() {
            let text = fs::read_to_string(&path).map_err(|source| Error::Io { path: path.clone(), source })?;
            serde_json::from_str(&text).map_err(|source| Error::Json { path: path.clone(), source })?
        } else {
            BTreeMap::new()
        };
        Ok(ConstantCache { path: Some(path), entries: RwLock::new(entries) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn zeta_key(r: usize, cols: usize) -> String {
        format!("zeta:{r}:{cols}")
    }

    pub fn oconst_key(r: usize, n: usize, tau: usize, rho: f64) -> String {
        format!("oconst:{r}:{n}:{tau}:{rho}")
    }

    pub fn get(&self, key: &str) -> Option<CachedConstant> {
        self.entries.read().expect("cache lock poisoned").get(key).copied()
    }

    /// Entries in key order.
    pub fn entries(&self) -> Vec<(String, CachedConstant)> {
        self.entries.read().expect("cache lock poisoned").iter().map(|(k, v)| (k.clone(), *v)).collect()
    }

    pub fn insert(&self, key: String, value: CachedConstant) -> Result<()> {
        let mut guard = self.entries.write().expect("cache lock poisoned");
        guard.insert(key, value);
        if let Some(path) = &self.path {
            write_atomic(path, &serde_json::to_string_pretty(&*guard).expect("cache entries serialize"))?;
        }
        Ok(())
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, text).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}
