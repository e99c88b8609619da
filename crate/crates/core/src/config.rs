//! Channel and Monte-Carlo configuration shared by every bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Block-fading MAC: coherence interval τ, per-user transmit antennas and
/// receive antennas.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub tau: usize,
    pub per_user_antennas: Vec<usize>,
    pub rx_antennas: usize,
}

impl ChannelConfig {
    pub fn new(tau: usize, per_user_antennas: Vec<usize>, rx_antennas: usize) -> Result<Self> {
        let cfg = ChannelConfig { tau, per_user_antennas, rx_antennas };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `users` single-antenna transmitters.
    pub fn single_antenna(users: usize, rx_antennas: usize, tau: usize) -> Result<Self> {
        Self::new(tau, vec![1; users], rx_antennas)
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_user_antennas.is_empty() {
            return Err(Error::Config("at least one user is required".into()));
        }
        if self.per_user_antennas.contains(&0) || self.rx_antennas == 0 {
            return Err(Error::Config("antenna counts must be at least 1".into()));
        }
        if self.tau < self.p() {
            return Err(Error::Config(format!(
                "coherence interval {} is shorter than max(n, r) = {}",
                self.tau,
                self.p()
            )));
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.per_user_antennas.len()
    }

    /// Total transmit antennas n.
    pub fn n(&self) -> usize {
        self.per_user_antennas.iter().sum()
    }

    pub fn r(&self) -> usize {
        self.rx_antennas
    }

    /// ℓ = min(n, r).
    pub fn ell(&self) -> usize {
        self.n().min(self.r())
    }

    /// p = max(n, r).
    pub fn p(&self) -> usize {
        self.n().max(self.r())
    }

    pub fn is_square(&self) -> bool {
        self.n() == self.r()
    }

    pub fn all_single_antenna(&self) -> bool {
        self.per_user_antennas.iter().all(|&k| k == 1)
    }
}

/// Budget and seeding for a Monte-Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub master_seed: u64,
    /// High bits of every stream id drawn for this estimate; sample i uses
    /// `stream_base ^ i`.
    pub stream_base: u64,
}

impl McConfig {
    pub fn new(samples: usize, master_seed: u64) -> Self {
        McConfig { samples, master_seed, stream_base: 0 }
    }

    pub fn with_stream_base(self, stream_base: u64) -> Self {
        McConfig { stream_base, ..self }
    }
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig::new(1_000_000, 0x5EED)
    }
}
