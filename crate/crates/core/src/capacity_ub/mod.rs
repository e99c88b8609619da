//! Upper bounds on the sum-rate capacity: the duality bound for general
//! antenna counts, its tightened square-case form, and the perfect-CSI
//! bound. All values are in nats per channel use.

mod gfun;
mod saddle;

pub use gfun::{g_general, g_star, g_star_with, GBatch, GStarEngine};
pub use saddle::{saddle_solve, SaddleConfig, SaddleMode, SaddleOutcome};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{ChannelConfig, McConfig};
use crate::error::{domain, Error, Result};
use crate::randmat::{cgauss_matrix, gram_eigenvalues_desc, par_samples, stream_base, McEstimate};
use crate::specfn::log_gamma_product;

/// Which bound a [`BoundEstimate`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    UbGeneral,
    UbSquare,
    UbCsi,
    LbUstm,
    LbGauss,
    #[serde(rename = "lb_2user")]
    Lb2user,
}

impl BoundKind {
    pub const ALL: [BoundKind; 6] =
        [BoundKind::UbGeneral, BoundKind::UbSquare, BoundKind::UbCsi, BoundKind::LbUstm, BoundKind::LbGauss, BoundKind::Lb2user];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::UbGeneral => "ub_general",
            BoundKind::UbSquare => "ub_square",
            BoundKind::UbCsi => "ub_csi",
            BoundKind::LbUstm => "lb_ustm",
            BoundKind::LbGauss => "lb_gauss",
            BoundKind::Lb2user => "lb_2user",
        }
    }

    pub fn is_upper(self) -> bool {
        matches!(self, BoundKind::UbGeneral | BoundKind::UbSquare | BoundKind::UbCsi)
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown bound kind '{s}'")))
    }
}

/// One bound evaluated at one SNR point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimate {
    /// Nats per channel use.
    pub value: f64,
    pub std_error: f64,
    pub kind: BoundKind,
    pub cfg: ChannelConfig,
    pub rho: f64,
    pub seed: u64,
    pub n_samples: usize,
    pub runtime_seconds: f64,
    /// Diagnostics: optimizer state, propagated constant errors, flags.
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("SNR must be positive and finite, got {rho}")))
    }
}

/// u(ρ) of the general bound; `zeta` and `oconst` are the Monte-Carlo
/// constants ζ and a for this configuration.
pub fn u_general(cfg: &ChannelConfig, rho: f64, zeta: &McEstimate, oconst: &McEstimate) -> Result<f64> {
    check_rho(rho)?;
    cfg.validate()?;
    let (tau, n, r, ell) = (cfg.tau as f64, cfg.n() as f64, cfg.r() as f64, cfg.ell() as f64);
    let excess = cfg.r() - cfg.ell();
    if !(oconst.mean > 0.0 && oconst.mean <= 1.0) {
        return Err(domain(format!("ordering constant must lie in (0, 1], got {}", oconst.mean)));
    }
    let zeta_coeff = (tau - n) * (r - ell) / tau;
    if zeta_coeff > 0.0 && !(zeta.mean > 0.0) {
        return Err(domain(format!("zeta must be positive when r > min(n, r), got {}", zeta.mean)));
    }
    let lg = |k: usize| log_gamma_product(k);
    let gamma_ratio = lg(excess) + lg(cfg.tau - cfg.ell()) + lg(cfg.n()) - lg(cfg.tau) - lg(cfg.p() - cfg.ell());
    let mut u = -r + r * n / tau * (tau * rho / n).ln() + gamma_ratio / tau + oconst.mean.ln() / tau + n * r / (tau * rho)
        + (r - ell) * (tau - ell) / tau;
    if zeta_coeff > 0.0 {
        u -= zeta_coeff * zeta.mean.ln();
    }
    Ok(u)
}

/// u*(ρ) of the square-case bound (n = r = m).
pub fn u_star(m: usize, tau: usize, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if m == 0 || tau < m {
        return Err(domain(format!("need 1 <= m <= tau, got m={m}, tau={tau}")));
    }
    let (mf, tf) = (m as f64, tau as f64);
    let gamma_ratio = log_gamma_product(m) + log_gamma_product(tau - m) - log_gamma_product(tau);
    Ok(-mf + mf * mf / tf * (tf * rho / mf).ln() + mf * mf / (tf * rho) + gamma_ratio / tf)
}

/// Linearized contribution of the ζ and a standard errors to u(ρ).
pub(crate) fn u_general_constant_error(cfg: &ChannelConfig, zeta: &McEstimate, oconst: &McEstimate) -> f64 {
    let tau = cfg.tau as f64;
    let zeta_coeff = (cfg.tau - cfg.n()) as f64 * (cfg.r() - cfg.ell()) as f64 / tau;
    let dz = if zeta_coeff > 0.0 { zeta_coeff * zeta.std_error / zeta.mean } else { 0.0 };
    let da = oconst.std_error / (tau * oconst.mean);
    (dz * dz + da * da).sqrt()
}

const CSI_TAG: u16 = 0xc5;

/// Perfect-receiver-CSI bound E[ln det(I_r + (ρ/n)SS†)], S r×n standard.
pub fn perfect_csi_ub(cfg: &ChannelConfig, rho: f64, mc: &McConfig) -> Result<BoundEstimate> {
    check_rho(rho)?;
    cfg.validate()?;
    if mc.samples < 2 {
        return Err(domain("at least two samples are required"));
    }
    let start = std::time::Instant::now();
    let (n, r) = (cfg.n(), cfg.r());
    let snr = rho / n as f64;
    let vals = par_samples(mc.samples, mc.master_seed, mc.stream_base ^ stream_base(CSI_TAG, 0), |rng| {
        let s: DMatrix<Complex64> = cgauss_matrix(n.min(r), n.max(r), rng);
        gram_eigenvalues_desc(&s).iter().map(|&e| (snr * e.max(0.0)).ln_1p()).sum()
    });
    let est = McEstimate::from_samples(&vals);
    Ok(BoundEstimate {
        value: est.mean,
        std_error: est.std_error,
        kind: BoundKind::UbCsi,
        cfg: cfg.clone(),
        rho,
        seed: mc.master_seed,
        n_samples: est.n_samples,
        runtime_seconds: start.elapsed().as_secs_f64(),
        meta: BTreeMap::new(),
    })
}
