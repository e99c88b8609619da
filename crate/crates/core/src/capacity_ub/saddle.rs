//! inf over λ of sup over D.
//!
//! For fixed D the objective is affine in λ, so F(λ) = sup_D g(D, λ) is
//! convex and golden-section search over λ is sound. The search runs in
//! t = ln(λ − λ₀), where λ₀ = nr/(τρ) is the smallest λ with a finite sup.
//! The inner sup runs Nelder–Mead in coordinates that keep D strictly
//! ordered: ln d_n = c and ln d_i − ln d_{i+1} = softplus(s_i) + min-gap.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::time::Instant;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::gfun::{g_general_d2, g_star_d2, GBatch, GStarEngine, MIN_REL_GAP};
use super::{u_general, u_general_constant_error, u_star, BoundEstimate, BoundKind};
use crate::config::{ChannelConfig, McConfig};
use crate::error::{dimension, domain, Error, Result};
use crate::randmat::{estimate_order_constant, estimate_zeta, stream_base, ConstantCache};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaddleMode {
    /// General bound; any n, r.
    General,
    /// Tightened bound; requires n = r.
    Square,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleConfig {
    /// The λ search starts at λ₀·(1 + this).
    pub lambda_floor_rel: f64,
    /// Smallest relative gap between consecutive d_i.
    pub min_rel_gap: f64,
    /// ln d is kept within ± this many nats of ln √(τρ/n).
    pub log_d_range: f64,
    /// Nelder–Mead starts per λ.
    pub starts: usize,
    pub inner_max_iters: u64,
    /// Nelder–Mead stops when the simplex costs have this standard deviation.
    pub inner_tol: f64,
    /// Outer convergence: bracket values agree to this many nats.
    pub outer_tol: f64,
    pub outer_max_iters: usize,
    /// Common-random-number batch for g during the search (general mode).
    pub inner_mc_samples: usize,
    /// Fresh batch used to re-estimate g at the final iterate (general mode).
    pub final_mc_samples: usize,
    /// Samples for ζ and a (general mode).
    pub constant_samples: usize,
    pub engine: GStarEngine,
    pub seed: u64,
}

impl Default for SaddleConfig {
    fn default() -> Self {
        SaddleConfig {
            lambda_floor_rel: 1e-9,
            min_rel_gap: MIN_REL_GAP,
            log_d_range: 14.0,
            starts: 3,
            inner_max_iters: 4000,
            inner_tol: 1e-11,
            outer_tol: 1e-4,
            outer_max_iters: 100,
            inner_mc_samples: 500,
            final_mc_samples: 20_000,
            constant_samples: 1_000_000,
            engine: GStarEngine::Auto,
            seed: 0x5EED,
        }
    }
}

/// Result of the inf–sup search for one objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleOutcome {
    /// inf_λ sup_D g.
    pub value: f64,
    pub lambda: f64,
    /// Maximizing singular values at the final λ, decreasing.
    pub d: Vec<f64>,
    /// (λ, sup_D g) for every outer evaluation, in visiting order.
    pub trace: Vec<(f64, f64)>,
    pub outer_iterations: usize,
    /// λ ended at the bottom of its bracket.
    pub lambda_at_floor: bool,
    /// The overall scale of D hit its parameterization limit.
    pub scale_limit_hit: bool,
    /// Consecutive d_i pinned at the minimum gap.
    pub gap_floor_hits: usize,
    /// The trace was not unimodal and a λ grid was used instead.
    pub grid_fallback: bool,
}

fn softplus(s: f64) -> f64 {
    if s > 30.0 {
        s
    } else {
        s.exp().ln_1p()
    }
}

struct Coords {
    n: usize,
    center: f64,
    range: f64,
    min_gap: f64,
}

impl Coords {
    /// Squared singular values (decreasing) from optimizer coordinates.
    fn decode(&self, x: &[f64]) -> Vec<f64> {
        let mut ln_d = vec![0.0; self.n];
        ln_d[self.n - 1] = x[0].clamp(self.center - self.range, self.center + self.range);
        for i in (0..self.n - 1).rev() {
            ln_d[i] = ln_d[i + 1] + softplus(x[i + 1]) + self.min_gap;
        }
        ln_d.iter().map(|l| (2.0 * l).exp()).collect()
    }

    fn scale_at_limit(&self, x: &[f64]) -> bool {
        (x[0] - self.center).abs() >= self.range * (1.0 - 1e-9)
    }

    fn gaps_at_floor(&self, x: &[f64]) -> usize {
        x[1..].iter().filter(|&&s| softplus(s) < 1e-6).count()
    }
}

struct NegObjective<'a> {
    f: &'a (dyn Fn(&[f64]) -> f64 + 'a),
}

impl CostFunction for NegObjective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(-(self.f)(x))
    }
}

fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, scfg: &SaddleConfig) -> Result<(Vec<f64>, f64)> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(scfg.inner_tol)
        .map_err(|e| Error::Optimizer(e.to_string()))?;
    let res = Executor::new(NegObjective { f }, solver)
        .configure(|s| s.max_iters(scfg.inner_max_iters))
        .timer(false)
        .run()
        .map_err(|e| Error::Optimizer(e.to_string()))?;
    let state = res.state();
    let x = state.get_best_param().cloned().unwrap_or_else(|| x0.to_vec());
    Ok((x, -state.get_best_cost()))
}

/// sup over D of `g(d², λ)` for one λ; returns (value, coordinates).
fn inner_sup(
    g: &dyn Fn(&[f64], f64) -> Result<f64>,
    lambda: f64,
    coords: &Coords,
    warm: Option<&[f64]>,
    scfg: &SaddleConfig,
    failures: &RefCell<Option<Error>>,
) -> Result<(f64, Vec<f64>)> {
    let n = coords.n;
    let f = |x: &[f64]| match g(&coords.decode(x), lambda) {
        Ok(v) if v.is_finite() => v,
        Ok(_) => f64::NEG_INFINITY,
        Err(e) => {
            failures.borrow_mut().get_or_insert(e);
            f64::NEG_INFINITY
        }
    };
    let with_gaps = |c: f64, s: f64| {
        let mut x = vec![s; n];
        x[0] = c;
        x
    };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = warm {
        starts.push(w.to_vec());
    }
    starts.push(with_gaps(coords.center, -3.0));
    // coarse scan of the overall scale
    let grid_best = (-8..=8)
        .map(|k| with_gaps(coords.center + 0.5 * k as f64, -1.0))
        .map(|x| (f(&x), x))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("nonempty grid")
        .1;
    starts.push(grid_best);
    starts.truncate(scfg.starts.max(1));

    let mut best: Option<(f64, Vec<f64>)> = None;
    for x0 in &starts {
        let (x, _) = nelder_mead(&f, x0, 0.5, scfg)?;
        // restart from the optimum to shake off a collapsed simplex
        let (x, v) = nelder_mead(&f, &x, 0.1, scfg)?;
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, x));
        }
    }
    let best = best.expect("at least one start");
    if !best.0.is_finite() {
        return Err(failures.borrow_mut().take().unwrap_or_else(|| domain("objective not finite at any start")));
    }
    Ok(best)
}

/// inf over λ ≥ λ₀ of sup over D of `g(d², λ)` for an n-entry spectrum.
pub(crate) fn inf_sup(
    g: &dyn Fn(&[f64], f64) -> Result<f64>,
    n: usize,
    lambda0: f64,
    tau_rho: f64,
    scfg: &SaddleConfig,
) -> Result<SaddleOutcome> {
    let coords = Coords {
        n,
        center: 0.5 * (tau_rho / n as f64).ln(),
        range: scfg.log_d_range,
        min_gap: scfg.min_rel_gap.ln_1p(),
    };
    let failures = RefCell::new(None);
    let mut trace: Vec<(f64, f64)> = Vec::new();
    let mut best_x: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let mut warm: Option<Vec<f64>> = None;
    let mut evals = 0usize;

    let mut outer = |t: f64, trace: &mut Vec<(f64, f64)>| -> Result<f64> {
        let lambda = lambda0 + t.exp();
        let (v, x) = inner_sup(g, lambda, &coords, warm.as_deref(), scfg, &failures)?;
        trace.push((lambda, v));
        best_x.insert(t.to_bits(), x.clone());
        warm = Some(x);
        evals += 1;
        Ok(v)
    };

    let t_lo = (lambda0 * scfg.lambda_floor_rel).ln();
    // bracket: grow λ − λ₀ by 4× until F turns upward
    let mut pts = vec![(t_lo, outer(t_lo, &mut trace)?)];
    let mut t = lambda0.max(1e-300).ln();
    loop {
        let v = outer(t, &mut trace)?;
        pts.push((t, v));
        let k = pts.len();
        if pts[k - 1].1 > pts[k - 2].1 {
            break;
        }
        if k > 60 {
            return Err(non_convergence(&trace, evals));
        }
        t += 4f64.ln();
    }
    let k = pts.len();
    let (mut a, mut fa) = if k >= 3 { pts[k - 3] } else { pts[0] };
    let (mut b, mut fb) = pts[k - 1];

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = outer(c, &mut trace)?;
    let mut fd = outer(d, &mut trace)?;
    let mut iters = 0;
    while fa.max(fb) - fc.min(fd) > scfg.outer_tol && (b - a) > 1e-9 * (1.0 + a.abs()) {
        iters += 1;
        if iters > scfg.outer_max_iters {
            return Err(non_convergence(&trace, evals));
        }
        if fc <= fd {
            (b, fb) = (d, fd);
            (d, fd) = (c, fc);
            c = b - INV_PHI * (b - a);
            fc = outer(c, &mut trace)?;
        } else {
            (a, fa) = (c, fc);
            (c, fc) = (d, fd);
            d = a + INV_PHI * (b - a);
            fd = outer(d, &mut trace)?;
        }
    }

    let mut grid_fallback = false;
    let unimodal = is_unimodal(&trace, scfg.outer_tol);
    let mut pick = [(a, fa), (c, fc), (d, fd), (b, fb)].into_iter().min_by(|x, y| x.1.total_cmp(&y.1)).expect("four points");
    if !unimodal {
        // documented fallback: a uniform grid over the bracket
        grid_fallback = true;
        let hi = pts[pts.len() - 1].0;
        for i in 0..=40 {
            let t = t_lo + (hi - t_lo) * i as f64 / 40.0;
            let v = outer(t, &mut trace)?;
            if v < pick.1 {
                pick = (t, v);
            }
        }
    }
    let x = best_x.get(&pick.0.to_bits()).cloned().expect("every visited t has a maximizer");
    let d2 = coords.decode(&x);
    Ok(SaddleOutcome {
        value: pick.1,
        lambda: lambda0 + pick.0.exp(),
        d: d2.iter().map(|v| v.sqrt()).collect(),
        outer_iterations: evals,
        lambda_at_floor: pick.0 <= t_lo + 1e-12,
        scale_limit_hit: coords.scale_at_limit(&x),
        gap_floor_hits: coords.gaps_at_floor(&x),
        grid_fallback,
        trace,
    })
}

fn non_convergence(trace: &[(f64, f64)], iterations: usize) -> Error {
    let (best_lambda, best_value) =
        trace.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap_or((f64::NAN, f64::NAN));
    Error::NonConvergence { iterations, best_value, best_lambda, trace: trace.to_vec() }
}

/// Decreasing-then-increasing in λ, up to `tol`.
fn is_unimodal(trace: &[(f64, f64)], tol: f64) -> bool {
    let mut pts = trace.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let Some(imin) = pts.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).map(|(i, _)| i) else {
        return true;
    };
    let left_ok = pts[..=imin].windows(2).all(|w| w[1].1 <= w[0].1 + tol);
    let right_ok = pts[imin..].windows(2).all(|w| w[1].1 + tol >= w[0].1);
    left_ok && right_ok
}

const G_BATCH_TAG: u16 = 0x5a;
const G_FINAL_TAG: u16 = 0x5b;

/// The duality upper bound: u + (1/τ)·inf_λ sup_D g.
pub fn saddle_solve(
    cfg: &ChannelConfig,
    rho: f64,
    mode: SaddleMode,
    scfg: &SaddleConfig,
    cache: Option<&ConstantCache>,
) -> Result<BoundEstimate> {
    cfg.validate()?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(domain(format!("SNR must be positive and finite, got {rho}")));
    }
    let start = Instant::now();
    let (n, r, tau) = (cfg.n(), cfg.r(), cfg.tau);
    let tr = tau as f64 * rho;
    let lambda0 = (n * r) as f64 / tr;
    let mut meta = BTreeMap::new();
    let (kind, value, std_error, n_samples, outcome) = match mode {
        SaddleMode::Square => {
            if !cfg.is_square() {
                return Err(dimension(format!("square mode needs n = r, got n={n} r={r}")));
            }
            let g = |d2: &[f64], lambda: f64| g_star_d2(d2, lambda, n, tau, rho, scfg.engine);
            let out = inf_sup(&g, n, lambda0, tr, scfg)?;
            let value = u_star(n, tau, rho)? + out.value / tau as f64;
            (BoundKind::UbSquare, value, 0.0, 0, out)
        }
        SaddleMode::General => {
            let cmc = McConfig::new(scfg.constant_samples, scfg.seed);
            let zeta = estimate_zeta(r, tau - n, &cmc, cache)?;
            let oconst = estimate_order_constant(cfg, rho, &cmc, cache)?;
            let batch_mc =
                McConfig::new(scfg.inner_mc_samples, scfg.seed).with_stream_base(stream_base(G_BATCH_TAG, 0));
            let batch = if tau > n { Some(GBatch::new(r, n, &batch_mc)?) } else { None };
            let g = |d2: &[f64], lambda: f64| g_general_d2(d2, lambda, cfg, rho, zeta.mean, batch.as_ref()).map(|e| e.mean);
            let out = inf_sup(&g, n, lambda0, tr, scfg)?;
            // unbiased re-estimate at the final iterate with fresh draws
            let final_mc =
                McConfig::new(scfg.final_mc_samples, scfg.seed).with_stream_base(stream_base(G_FINAL_TAG, 0));
            let fresh = if tau > n { Some(GBatch::new(r, n, &final_mc)?) } else { None };
            let d2: Vec<f64> = out.d.iter().map(|x| x * x).collect();
            let est = g_general_d2(&d2, out.lambda, cfg, rho, zeta.mean, fresh.as_ref())?;
            let value = u_general(cfg, rho, &zeta, &oconst)? + est.mean / tau as f64;
            meta.insert("zeta".into(), json!(zeta));
            meta.insert("order_constant".into(), json!(oconst));
            meta.insert("constants_std_error".into(), json!(u_general_constant_error(cfg, &zeta, &oconst)));
            meta.insert("search_value".into(), json!(out.value));
            (BoundKind::UbGeneral, value, est.std_error / tau as f64, est.n_samples, out)
        }
    };
    meta.insert("lambda".into(), json!(outcome.lambda));
    meta.insert("d".into(), json!(outcome.d));
    meta.insert("outer_iterations".into(), json!(outcome.outer_iterations));
    meta.insert("lambda_at_floor".into(), json!(outcome.lambda_at_floor));
    meta.insert("scale_limit_hit".into(), json!(outcome.scale_limit_hit));
    meta.insert("gap_floor_hits".into(), json!(outcome.gap_floor_hits));
    meta.insert("grid_fallback".into(), json!(outcome.grid_fallback));
    Ok(BoundEstimate {
        value,
        std_error,
        kind,
        cfg: cfg.clone(),
        rho,
        seed: scfg.seed,
        n_samples,
        runtime_seconds: start.elapsed().as_secs_f64(),
        meta,
    })
}
