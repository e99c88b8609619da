//! Two single-antenna users: the inner average over D collapses to a 1-D
//! integral over α = |V₁V₂†|, where α² ~ Beta(1, τ−1) and
//! d² = (τρ/2)(1 ± α).

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use super::{check_inputs, finish, outer_draw, LbSampleBudget};
use crate::capacity_ub::{BoundEstimate, BoundKind};
use crate::config::ChannelConfig;
use crate::detkit::quad::{integrate_with, GaussLegendre};
use crate::detkit::MKernel;
use crate::error::{domain, Error, Result};
use crate::randmat::{mac_ustm_input, stream_base, McEstimate, RngStream};
use crate::specfn::log_gamma_product;

/// Relative panel error at which the α-quadratures stop.
const QUAD_TOL: f64 = 1e-9;
const OUTER_TAG: u16 = 0x31;

/// E(α) = diag((1+α)/(μ+α), (1−α)/(μ−α)).
fn e_alpha(mu: f64, alpha: f64) -> [f64; 2] {
    [(1.0 + alpha) / (mu + alpha), (1.0 - alpha) / (mu - alpha)]
}

/// ln of det M(a, E(α))·(μ²−α²)^{τ−r−1} with its sign.
fn ln_integrand(kernel: &mut MKernel, a: &[f64], mu: f64, alpha: f64, tau: usize) -> (f64, i8) {
    let e = e_alpha(mu, alpha);
    let ratio = kernel.det_over_vandermonde(a, &e).value;
    let r = a.len();
    let ln = ratio.ln_abs + (e[0] - e[1]).ln() + (tau as f64 - r as f64 - 1.0) * (mu * mu - alpha * alpha).ln();
    (ln, ratio.sign)
}

/// ln ∫₀¹ det M(a, E(α))(μ²−α²)^{τ−r−1} dα, integrated after factoring out
/// the largest integrand value so the range stays representable.
fn ln_alpha_integral(kernel: &mut MKernel, a: &[f64], mu: f64, tau: usize, rule: &GaussLegendre) -> Result<f64> {
    let shift = (1..64)
        .map(|k| ln_integrand(kernel, a, mu, k as f64 / 64.0, tau).0)
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::Quadrature("alpha integrand vanishes on the probe grid".into()));
    }
    let cell = RefCell::new(kernel);
    let f = |alpha: f64| {
        let (ln, sign) = ln_integrand(&mut cell.borrow_mut(), a, mu, alpha, tau);
        f64::from(sign) * (ln - shift).exp()
    };
    let v = integrate_with(rule, f, 0.0, 1.0, QUAD_TOL)?;
    if !(v > 0.0) {
        return Err(Error::NegativeInnerAverage { inner_samples: 0 });
    }
    Ok(shift + v.ln())
}

/// Deterministic part: ln γ̃(τ−2) − ln γ̃(τ) − ln(τρ/2) − ln(τ−1)
/// − r(τ−1)∫₀¹ ln(μ²−u)(1−u)^{τ−2} du.
fn base_term(r: usize, tau: usize, rho: f64, mu: f64, rule: &GaussLegendre) -> Result<f64> {
    let tf = tau as f64;
    let i1 = integrate_with(rule, |u: f64| (mu * mu - u).ln() * (1.0 - u).powi(tau as i32 - 2), 0.0, 1.0, QUAD_TOL)?;
    Ok(log_gamma_product(tau - 2) - log_gamma_product(tau) - (tf * rho / 2.0).ln()
        - r as f64 * (tf - 1.0) * i1
        - (tf - 1.0).ln())
}

/// Two-user lower bound with the inner average over D done by quadrature.
pub fn two_user_lb(cfg: &ChannelConfig, rho: f64, budget: &LbSampleBudget) -> Result<BoundEstimate> {
    check_inputs(cfg, rho, budget)?;
    if cfg.per_user_antennas != [1, 1] {
        return Err(domain("the two-user form needs exactly two single-antenna users"));
    }
    if cfg.r() < 2 {
        return Err(domain("the two-user form needs r >= 2"));
    }
    let start = Instant::now();
    let (r, tau) = (cfg.r(), cfg.tau);
    let mu = 1.0 + 2.0 / (tau as f64 * rho);
    let rule = GaussLegendre::new(budget.quad_points);
    let base = base_term(r, tau, rho, mu, &rule)?;
    let outer_base = stream_base(OUTER_TAG, 0);
    let vals: Vec<f64> = (0..budget.outer_samples as u64)
        .into_par_iter()
        .map_init(
            || MKernel::new(r, 2, tau).expect("dimensions validated"),
            |kernel, i| {
                let mut rng = RngStream::indexed(budget.seed, outer_base, i).rng();
                let x = mac_ustm_input(cfg, rho, &mut rng);
                let draw = outer_draw(cfg, &x, &mut rng);
                // outer_draw includes −r Σ ln(1+d_X²); here that term lives in `base`
                let ln_det_x: f64 = crate::randmat::gram_eigenvalues_desc(&x).iter().map(|e| e.max(0.0).ln_1p()).sum();
                let j = ln_alpha_integral(kernel, &draw.a, mu, tau, &rule)?;
                Ok(base + draw.partial + r as f64 * ln_det_x - j)
            },
        )
        .collect::<Result<Vec<f64>>>()?;
    let est = McEstimate::from_samples(&vals);
    let mut meta = BTreeMap::new();
    meta.insert("mu".into(), json!(mu));
    Ok(finish(cfg, rho, BoundKind::Lb2user, budget, est, start, meta))
}
