//! The inner objectives g(D, λ) and g*(D, λ).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ChannelConfig, McConfig};
use crate::detkit::quadform::{closed_form_digit_loss, closed_form_terms};
use crate::detkit::{exp_logdet_quadratic_form, perturbed_exp_logdet, DiagSpectrum, OrderedSpectrum};
use crate::error::{dimension, domain, Result};
use crate::randmat::{cgauss_matrix, McEstimate, RngStream};

/// How g* evaluates its E[ln det] term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GStarEngine {
    /// Closed-form determinant sum when it is well conditioned, otherwise
    /// the divided-difference engine; near-coincident entries go through
    /// ε-separation.
    #[default]
    Auto,
    ClosedForm,
    Stable,
}

/// Entries closer than this (relative) count as coincident.
pub(crate) const MIN_REL_GAP: f64 = 1e-7;
/// Largest digit loss tolerated from the closed form under `Auto`.
const CLOSED_FORM_MAX_DIGITS: f64 = 5.0;

fn check_square(cfg: &ChannelConfig) -> Result<usize> {
    cfg.validate()?;
    if !cfg.is_square() {
        return Err(dimension(format!("g* needs n = r, got n={} r={}", cfg.n(), cfg.r())));
    }
    Ok(cfg.n())
}

/// g*(D, λ) for the square case n = r = m.
pub fn g_star(d: &DiagSpectrum, lambda: f64, cfg: &ChannelConfig, rho: f64) -> Result<f64> {
    g_star_with(d, lambda, cfg, rho, GStarEngine::Auto)
}

pub fn g_star_with(d: &DiagSpectrum, lambda: f64, cfg: &ChannelConfig, rho: f64, engine: GStarEngine) -> Result<f64> {
    let m = check_square(cfg)?;
    if d.len() != m {
        return Err(dimension(format!("spectrum has {} entries, expected {m}", d.len())));
    }
    if !(rho > 0.0) || !(lambda >= 0.0) {
        return Err(domain(format!("need rho > 0 and lambda >= 0, got {rho}, {lambda}")));
    }
    let d2: Vec<f64> = d.values().iter().map(|x| x * x).collect();
    g_star_d2(&d2, lambda, m, cfg.tau, rho, engine)
}

/// g* from squared singular values in decreasing order.
pub(crate) fn g_star_d2(d2: &[f64], lambda: f64, m: usize, tau: usize, rho: f64, engine: GStarEngine) -> Result<f64> {
    let (mf, tr) = (m as f64, tau as f64 * rho);
    let sum: f64 = d2.iter().sum();
    let mut g = mf * mf * sum / tr - mf * d2.iter().map(|x| x.ln_1p()).sum::<f64>() + lambda * (tr - sum);
    if tau > m {
        g += (tau - m) as f64 * exp_logdet_term(d2, tau, engine)?;
    }
    Ok(g)
}

/// E[ln det(Z(I_τ + X†X)Z†)], Z m×τ standard, X with squared singular values d2.
fn exp_logdet_term(d2: &[f64], tau: usize, engine: GStarEngine) -> Result<f64> {
    let m = d2.len();
    let l0: Vec<f64> = d2.iter().map(|x| 1.0 + x).collect();
    let stable = || {
        let mut l = l0.clone();
        l.resize(tau, 1.0);
        exp_logdet_quadratic_form(&l, m)
    };
    match engine {
        GStarEngine::Stable => stable(),
        GStarEngine::ClosedForm => closed_form_terms(&OrderedSpectrum::new(l0.clone())?, tau).map(|(v, _)| v),
        GStarEngine::Auto => {
            let crowded = d2.windows(2).any(|w| (w[0] - w[1]).abs() <= MIN_REL_GAP * w[0]);
            if crowded {
                perturbed_exp_logdet(&l0, tau).map(|p| p.value)
            } else if closed_form_digit_loss(&l0, tau) <= CLOSED_FORM_MAX_DIGITS {
                closed_form_terms(&OrderedSpectrum::new(l0.clone())?, tau).map(|(v, _)| v)
            } else {
                stable()
            }
        }
    }
}

/// A fixed batch of r×n standard Gaussian matrices, reused across
/// evaluations of g so an optimizer sees a deterministic surrogate.
#[derive(Clone, Debug)]
pub struct GBatch {
    samples: Vec<DMatrix<Complex64>>,
    r: usize,
    n: usize,
}

impl GBatch {
    pub fn new(r: usize, n: usize, mc: &McConfig) -> Result<Self> {
        if mc.samples < 2 {
            return Err(domain("at least two samples are required"));
        }
        let samples = (0..mc.samples as u64)
            .into_par_iter()
            .map(|i| cgauss_matrix(r, n, &mut RngStream::indexed(mc.master_seed, mc.stream_base, i).rng()))
            .collect();
        Ok(GBatch { samples, r, n })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Per-sample ln det(G(I+D²)G† + ζI_r), in sample order.
    pub fn logdets(&self, d2: &[f64], zeta: f64) -> Result<Vec<f64>> {
        if d2.len() != self.n {
            return Err(dimension(format!("spectrum has {} entries, expected {}", d2.len(), self.n)));
        }
        let scale: Vec<f64> = d2.iter().map(|x| (1.0 + x).sqrt()).collect();
        let r = self.r;
        self.samples
            .par_iter()
            .map(|g| {
                let h = DMatrix::from_fn(r, self.n, |i, j| g[(i, j)] * scale[j]);
                let mut a = &h * h.adjoint();
                for i in 0..r {
                    a[(i, i)] += zeta;
                }
                a.cholesky()
                    .map(|c| 2.0 * c.l_dirty().diagonal().iter().map(|x| x.re.ln()).sum::<f64>())
                    .ok_or_else(|| domain("G(I+D²)G† + ζI is not positive definite; ζ must be > 0 when r > n"))
            })
            .collect()
    }

    pub fn expectation(&self, d2: &[f64], zeta: f64) -> Result<McEstimate> {
        Ok(McEstimate::from_samples(&self.logdets(d2, zeta)?))
    }
}

/// g(D, λ) of the general bound; the expectation over G is estimated from
/// `mc.samples` fresh draws.
pub fn g_general(
    d: &DiagSpectrum,
    lambda: f64,
    cfg: &ChannelConfig,
    rho: f64,
    zeta: &McEstimate,
    mc: &McConfig,
) -> Result<McEstimate> {
    cfg.validate()?;
    if d.len() != cfg.n() {
        return Err(dimension(format!("spectrum has {} entries, expected {}", d.len(), cfg.n())));
    }
    if !(rho > 0.0) || !(lambda >= 0.0) {
        return Err(domain(format!("need rho > 0 and lambda >= 0, got {rho}, {lambda}")));
    }
    let d2: Vec<f64> = d.values().iter().map(|x| x * x).collect();
    let batch = if cfg.tau > cfg.n() { Some(GBatch::new(cfg.r(), cfg.n(), mc)?) } else { None };
    g_general_d2(&d2, lambda, cfg, rho, zeta.mean, batch.as_ref())
}

pub(crate) fn g_general_d2(
    d2: &[f64],
    lambda: f64,
    cfg: &ChannelConfig,
    rho: f64,
    zeta: f64,
    batch: Option<&GBatch>,
) -> Result<McEstimate> {
    let (n, r, tr) = (cfg.n() as f64, cfg.r() as f64, cfg.tau as f64 * rho);
    let sum: f64 = d2.iter().sum();
    let det_part = n * r * sum / tr - r * d2.iter().map(|x| x.ln_1p()).sum::<f64>() + lambda * (tr - sum);
    let coeff = (cfg.tau - cfg.n()) as f64;
    match batch {
        Some(b) if coeff > 0.0 => {
            let e = b.expectation(d2, zeta)?;
            Ok(McEstimate { mean: det_part + coeff * e.mean, std_error: coeff * e.std_error, n_samples: e.n_samples })
        }
        _ if coeff > 0.0 => Err(domain("a G batch is required when tau > n")),
        _ => Ok(McEstimate::exact(det_part)),
    }
}
