//! The two Monte-Carlo constants of the general upper bound: ζ, the mean
//! largest eigenvalue of a complex Wishart matrix, and the ordering
//! probability a.

use super::{cgauss_matrix, gram_eigenvalues_desc, par_samples, stream_base, CachedConstant, ConstantCache, McEstimate};
use crate::config::{ChannelConfig, McConfig};
use crate::error::{domain, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

const ZETA_TAG: u16 = 0x7a;
const OCONST_TAG: u16 = 0x6f;

/// Looks up `key`, reusing an entry only when it came from the same seed
/// with at least the requested sample count.
fn cached_or<F>(cache: Option<&ConstantCache>, key: String, mc: &McConfig, compute: F) -> Result<McEstimate>
where
    F: FnOnce() -> McEstimate,
{
    if let Some(hit) = cache.and_then(|c| c.get(&key)) {
        if hit.master_seed == mc.master_seed && hit.n_samples >= mc.samples {
            return Ok(hit.estimate());
        }
    }
    let est = compute();
    if let Some(c) = cache {
        c.insert(
            key,
            CachedConstant { mean: est.mean, std_error: est.std_error, n_samples: est.n_samples, master_seed: mc.master_seed },
        )?;
    }
    Ok(est)
}

/// ζ = E[λ_max(HH†)] for H r×cols with i.i.d. CN(0,1) entries; exactly 0
/// when cols = 0.
pub fn estimate_zeta(r: usize, cols: usize, mc: &McConfig, cache: Option<&ConstantCache>) -> Result<McEstimate> {
    if r == 0 {
        return Err(domain("zeta needs r >= 1"));
    }
    if cols == 0 {
        return Ok(McEstimate::exact(0.0));
    }
    if mc.samples < 2 {
        return Err(domain("at least two samples are required"));
    }
    let base = mc.stream_base ^ stream_base(ZETA_TAG, 0);
    cached_or(cache, ConstantCache::zeta_key(r, cols), mc, || {
        // the nonzero spectrum of HH† equals that of H†H; use the smaller Gram
        let (rows, c) = (r.min(cols), r.max(cols));
        let vals = par_samples(mc.samples, mc.master_seed, base, |rng| {
            let h = cgauss_matrix(rows, c, rng);
            gram_eigenvalues_desc(&h)[0]
        });
        McEstimate::from_samples(&vals)
    })
}

/// a = P[σ_ℓ(A) > σ_max(B)], A r×n with CN(0, τρ/n) entries and B an
/// independent (r−ℓ)×(τ−ℓ) standard matrix; exactly 1 when r = ℓ.
pub fn estimate_order_constant(
    cfg: &ChannelConfig,
    rho: f64,
    mc: &McConfig,
    cache: Option<&ConstantCache>,
) -> Result<McEstimate> {
    cfg.validate()?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(domain(format!("SNR must be positive, got {rho}")));
    }
    let (r, n, tau, ell) = (cfg.r(), cfg.n(), cfg.tau, cfg.ell());
    if r == ell {
        return Ok(McEstimate::exact(1.0));
    }
    if mc.samples < 2 {
        return Err(domain("at least two samples are required"));
    }
    let base = mc.stream_base ^ stream_base(OCONST_TAG, 0);
    let scale = Complex64::new((tau as f64 * rho / n as f64).sqrt(), 0.0);
    cached_or(cache, ConstantCache::oconst_key(r, n, tau, rho), mc, || {
        let vals = par_samples(mc.samples, mc.master_seed, base, |rng| {
            // here ℓ = n < r, so σ_ℓ(A)² is the smallest eigenvalue of A†A
            let a: DMatrix<Complex64> = cgauss_matrix(n, r, rng) * scale;
            let a_min = gram_eigenvalues_desc(&a)[ell - 1];
            let (br, bc) = (r - ell, tau - ell);
            let b = cgauss_matrix(br.min(bc), br.max(bc), rng);
            let b_max = gram_eigenvalues_desc(&b)[0];
            if a_min > b_max {
                1.0
            } else {
                0.0
            }
        });
        McEstimate::from_samples(&vals)
    })
}
