//! Lower bounds on the sum-rate capacity from the USTM output density.
//!
//! Each outer sample draws (X, S, W), forms Y = SX + W and evaluates
//!
//!   ln γ̃(τ−ℓ) − ln γ̃(τ) + tr(YX†(I+XX†)⁻¹XY†) − r Σ ln(1+d_X²)
//!     + ln κ(a, τ−r) − ln mean_D[det M(a, b) / (det(I+D²)^r κ(b, τ−n))]
//!
//! with a the eigenvalues of YY†, b = d²/(1+d²) and the inner mean over a
//! pool of input spectra shared by all outer samples. The trace term has
//! mean r·τρ; pairing it with the sampled X removes most of the outer
//! variance. Results are divided by τ unless the budget says otherwise.

mod two_user;

pub use two_user::two_user_lb;

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::capacity_ub::{BoundEstimate, BoundKind};
use crate::config::ChannelConfig;
use crate::detkit::{ln_kappa, MKernel};
use crate::error::{domain, Error, Result};
use crate::randmat::{
    cgauss_matrix, gaussian_input, gram_eigenvalues_desc, hermitian_eigenvalues_desc, mac_ustm_input, stream_base,
    McEstimate, RngStream,
};
use crate::specfn::log_gamma_product;

/// Sample budget of a lower-bound estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LbSampleBudget {
    /// Draws of Y.
    pub outer_samples: usize,
    /// Draws of D in the shared inner pool.
    pub inner_samples: usize,
    /// Base Gauss–Legendre nodes for the two-user α-integral.
    pub quad_points: usize,
    pub seed: u64,
    /// Report nats per channel use (divide by τ). Off gives the per-block value.
    pub divide_by_tau: bool,
    /// Draw a fresh inner pool for every outer sample instead of sharing one.
    pub fresh_inner_pool: bool,
}

impl Default for LbSampleBudget {
    fn default() -> Self {
        LbSampleBudget {
            outer_samples: 20_000,
            inner_samples: 1_000,
            quad_points: 20,
            seed: 0x5EED,
            divide_by_tau: true,
            fresh_inner_pool: false,
        }
    }
}

impl LbSampleBudget {
    fn validate(&self) -> Result<()> {
        if self.outer_samples < 2 || self.inner_samples < 1 || self.quad_points < 1 {
            return Err(domain("sample budgets must be positive (at least two outer samples)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum InputLaw {
    Ustm,
    Gaussian,
}

impl InputLaw {
    fn draw(self, cfg: &ChannelConfig, rho: f64, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        match self {
            InputLaw::Ustm => mac_ustm_input(cfg, rho, rng),
            InputLaw::Gaussian => gaussian_input(cfg, rho, rng),
        }
    }

    fn tags(self) -> (u16, u16) {
        match self {
            InputLaw::Ustm => (0x11, 0x12),
            InputLaw::Gaussian => (0x21, 0x22),
        }
    }
}

/// One inner-pool spectrum, reduced to what the inner average needs.
#[derive(Clone, Debug)]
pub(crate) struct PoolEntry {
    /// b = d²/(1+d²), nonincreasing.
    b: Vec<f64>,
    /// −(τ−n) Σ ln b − r Σ ln(1+d²).
    offset: f64,
}

impl PoolEntry {
    pub(crate) fn new(d2: &[f64], r: usize, tau: usize) -> Self {
        let n = d2.len();
        let b: Vec<f64> = d2.iter().map(|x| x / (1.0 + x)).collect();
        let offset = -((tau - n) as f64) * b.iter().map(|x| x.ln()).sum::<f64>()
            - r as f64 * d2.iter().map(|x| x.ln_1p()).sum::<f64>();
        PoolEntry { b, offset }
    }
}

/// Squared singular values of an input draw, decreasing (repeats allowed).
fn input_d2(x: &DMatrix<Complex64>) -> Vec<f64> {
    gram_eigenvalues_desc(x).into_iter().map(|e| e.max(f64::MIN_POSITIVE)).collect()
}

fn draw_pool(cfg: &ChannelConfig, rho: f64, law: InputLaw, count: usize, seed: u64, base: u64) -> Vec<Vec<f64>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| input_d2(&law.draw(cfg, rho, &mut RngStream::indexed(seed, base, i).rng())))
        .collect()
}

/// The Y-dependent part of one outer sample.
pub(crate) struct OuterDraw {
    /// Eigenvalues of YY†, decreasing.
    pub a: Vec<f64>,
    /// tr(YX†(I+XX†)⁻¹XY†) − r Σ ln(1+d_X²) + ln κ(a, τ−r).
    pub partial: f64,
}

pub(crate) fn outer_draw(cfg: &ChannelConfig, x: &DMatrix<Complex64>, rng: &mut impl Rng) -> OuterDraw {
    let (n, r, tau) = (cfg.n(), cfg.r(), cfg.tau);
    let s = cgauss_matrix(r, n, rng);
    let w = cgauss_matrix(r, tau, rng);
    let y = &s * x + w;
    let a = hermitian_eigenvalues_desc(&(&y * y.adjoint()));
    let xx = x * x.adjoint();
    let mut b = xx.clone();
    for i in 0..n {
        b[(i, i)] += Complex64::new(1.0, 0.0);
    }
    let p = x * y.adjoint();
    let z = b.cholesky().expect("I + XX† is positive definite").solve(&p);
    let trace: f64 = (p.adjoint() * z).trace().re;
    let ln_det_x: f64 = hermitian_eigenvalues_desc(&xx).iter().map(|e| e.max(0.0).ln_1p()).sum();
    let partial = trace - r as f64 * ln_det_x + ln_kappa(&a, tau - r);
    OuterDraw { a, partial }
}

/// ln mean over the pool of det M(a, b)/(det(I+D²)^r κ(b, τ−n)); `None`
/// when the signed average is not positive.
pub(crate) fn ln_inner_mean(kernel: &mut MKernel, a: &[f64], pool: &[PoolEntry]) -> Option<f64> {
    let mut terms: Vec<(f64, i8)> = Vec::with_capacity(pool.len());
    for e in pool {
        let v = kernel.det_over_vandermonde(a, &e.b).value;
        if v.sign != 0 {
            terms.push((v.ln_abs + e.offset, v.sign));
        }
    }
    let top = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return None;
    }
    let total: f64 = terms.iter().map(|&(l, s)| f64::from(s) * (l - top).exp()).sum();
    (total > 0.0).then(|| top + (total / pool.len() as f64).ln())
}

fn check_inputs(cfg: &ChannelConfig, rho: f64, budget: &LbSampleBudget) -> Result<()> {
    cfg.validate()?;
    budget.validate()?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(domain(format!("SNR must be positive and finite, got {rho}")));
    }
    Ok(())
}

/// Per-outer-sample values (per block, not yet divided by τ), one column
/// per pool in `pools`.
fn outer_values(
    cfg: &ChannelConfig,
    rho: f64,
    law: InputLaw,
    pools: &[Vec<PoolEntry>],
    budget: &LbSampleBudget,
) -> Result<Vec<Vec<f64>>> {
    let (n, r, tau) = (cfg.n(), cfg.r(), cfg.tau);
    let constant = log_gamma_product(tau - cfg.ell()) - log_gamma_product(tau);
    let (pool_tag, outer_tag) = law.tags();
    let base = stream_base(outer_tag, 0);
    let fresh_base = stream_base(pool_tag, 1);
    (0..budget.outer_samples as u64)
        .into_par_iter()
        .map_init(
            || MKernel::new(r, n, tau).expect("dimensions validated"),
            |kernel, i| {
                let mut rng = RngStream::indexed(budget.seed, base, i).rng();
                let x = law.draw(cfg, rho, &mut rng);
                let draw = outer_draw(cfg, &x, &mut rng);
                let own;
                let pools: &[Vec<PoolEntry>] = if budget.fresh_inner_pool {
                    let fresh = draw_pool(cfg, rho, law, budget.inner_samples, budget.seed, fresh_base ^ (i << 16));
                    own = vec![fresh.iter().map(|d2| PoolEntry::new(d2, r, tau)).collect::<Vec<_>>()];
                    &own
                } else {
                    pools
                };
                pools
                    .iter()
                    .map(|pool| {
                        ln_inner_mean(kernel, &draw.a, pool)
                            .map(|ln_mean| constant + draw.partial - ln_mean)
                            .ok_or(Error::NegativeInnerAverage { inner_samples: pool.len() })
                    })
                    .collect::<Result<Vec<f64>>>()
            },
        )
        .collect()
}

fn estimate(
    cfg: &ChannelConfig,
    rho: f64,
    law: InputLaw,
    kind: BoundKind,
    budget: &LbSampleBudget,
) -> Result<BoundEstimate> {
    check_inputs(cfg, rho, budget)?;
    let start = Instant::now();
    let attempt = |b: &LbSampleBudget| -> Result<McEstimate> {
        let pool_base = stream_base(law.tags().0, 0);
        let pool: Vec<PoolEntry> = draw_pool(cfg, rho, law, b.inner_samples, b.seed, pool_base)
            .iter()
            .map(|d2| PoolEntry::new(d2, cfg.r(), cfg.tau))
            .collect();
        let vals: Vec<f64> = outer_values(cfg, rho, law, &[pool], b)?.into_iter().map(|v| v[0]).collect();
        Ok(McEstimate::from_samples(&vals))
    };
    let mut used = *budget;
    let est = match attempt(budget) {
        Err(Error::NegativeInnerAverage { .. }) => {
            used.inner_samples = budget.inner_samples * 4;
            attempt(&used)?
        }
        other => other?,
    };
    Ok(finish(cfg, rho, kind, &used, est, start, BTreeMap::new()))
}

fn finish(
    cfg: &ChannelConfig,
    rho: f64,
    kind: BoundKind,
    budget: &LbSampleBudget,
    est: McEstimate,
    start: Instant,
    mut meta: BTreeMap<String, serde_json::Value>,
) -> BoundEstimate {
    let scale = if budget.divide_by_tau { 1.0 / cfg.tau as f64 } else { 1.0 };
    meta.insert("divided_by_tau".into(), json!(budget.divide_by_tau));
    meta.insert("inner_samples".into(), json!(budget.inner_samples));
    meta.insert("fresh_inner_pool".into(), json!(budget.fresh_inner_pool));
    BoundEstimate {
        value: est.mean * scale,
        std_error: est.std_error * scale,
        kind,
        cfg: cfg.clone(),
        rho,
        seed: budget.seed,
        n_samples: est.n_samples,
        runtime_seconds: start.elapsed().as_secs_f64(),
        meta,
    }
}

/// MAC-USTM lower bound. Users with several antennas are routed through
/// [`ustm_lb_multiantenna`].
pub fn ustm_lb(cfg: &ChannelConfig, rho: f64, budget: &LbSampleBudget) -> Result<BoundEstimate> {
    if !cfg.all_single_antenna() {
        return ustm_lb_multiantenna(cfg, rho, budget);
    }
    estimate(cfg, rho, InputLaw::Ustm, BoundKind::LbUstm, budget)
}

/// Lower bound with i.i.d. Gaussian input X = √(ρ/n)·G.
pub fn gaussian_lb(cfg: &ChannelConfig, rho: f64, budget: &LbSampleBudget) -> Result<BoundEstimate> {
    estimate(cfg, rho, InputLaw::Gaussian, BoundKind::LbGauss, budget)
}

/// Relative spacing used to split repeated singular values.
pub const SEPARATION_EPS: f64 = 1e-5;

/// Splits runs of (near-)equal entries of a decreasing list symmetrically
/// about their centre with relative spacing `eps`.
pub(crate) fn separate_repeats(d2: &[f64], eps: f64) -> (Vec<f64>, bool) {
    let mut out = d2.to_vec();
    let mut touched = false;
    let mut i = 0;
    while i < d2.len() {
        let mut j = i + 1;
        while j < d2.len() && (d2[i] - d2[j]).abs() <= 1e-9 * d2[i] {
            j += 1;
        }
        let q = j - i;
        if q > 1 {
            touched = true;
            let centre = d2[i..j].iter().sum::<f64>() / q as f64;
            for (k, v) in out[i..j].iter_mut().enumerate() {
                *v = centre * (1.0 + eps * ((q - 1) as f64 / 2.0 - k as f64));
            }
        }
        i = j;
    }
    (out, touched)
}

/// MAC-USTM lower bound for users with several antennas. Input spectra then
/// carry exactly repeated values; each pool spectrum is split at relative
/// spacing ε and ε/2 and the two estimates are Richardson-combined
/// (second order, since the split is symmetric). The gap between the
/// combined and the finer estimate is folded into the standard error.
pub fn ustm_lb_multiantenna(cfg: &ChannelConfig, rho: f64, budget: &LbSampleBudget) -> Result<BoundEstimate> {
    if cfg.all_single_antenna() {
        return estimate(cfg, rho, InputLaw::Ustm, BoundKind::LbUstm, budget);
    }
    check_inputs(cfg, rho, budget)?;
    if budget.fresh_inner_pool {
        return Err(domain("the multi-antenna estimator always shares its inner pool"));
    }
    let start = Instant::now();
    let (r, tau) = (cfg.r(), cfg.tau);
    let law = InputLaw::Ustm;
    let attempt = |b: &LbSampleBudget| -> Result<(McEstimate, f64, usize)> {
        let raw = draw_pool(cfg, rho, law, b.inner_samples, b.seed, stream_base(law.tags().0, 0));
        let mut split = 0;
        let mut pools = vec![Vec::new(), Vec::new()];
        for d2 in &raw {
            let (coarse, touched) = separate_repeats(d2, SEPARATION_EPS);
            let (fine, _) = separate_repeats(d2, 0.5 * SEPARATION_EPS);
            split += usize::from(touched);
            pools[0].push(PoolEntry::new(&coarse, r, tau));
            pools[1].push(PoolEntry::new(&fine, r, tau));
        }
        let vals = outer_values(cfg, rho, law, &pools, b)?;
        let rich: Vec<f64> = vals.iter().map(|v| (4.0 * v[1] - v[0]) / 3.0).collect();
        let fine: Vec<f64> = vals.iter().map(|v| v[1]).collect();
        let est = McEstimate::from_samples(&rich);
        let delta = (est.mean - McEstimate::from_samples(&fine).mean).abs();
        Ok((est, delta, split))
    };
    let mut used = *budget;
    let (est, delta, split) = match attempt(budget) {
        Err(Error::NegativeInnerAverage { .. }) => {
            used.inner_samples = budget.inner_samples * 4;
            attempt(&used)?
        }
        other => other?,
    };
    if delta > 10.0 * est.std_error {
        return Err(Error::PerturbationInstability { delta, std_error: est.std_error });
    }
    let folded = McEstimate { std_error: (est.std_error.powi(2) + delta * delta).sqrt(), ..est };
    let mut meta = BTreeMap::new();
    meta.insert("perturbation_delta".into(), json!(delta / if used.divide_by_tau { tau as f64 } else { 1.0 }));
    meta.insert("split_pool_entries".into(), json!(split));
    Ok(finish(cfg, rho, BoundKind::LbUstm, &used, folded, start, meta))
}
