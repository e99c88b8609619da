//! Reproducible random matrices and Monte-Carlo plumbing.
//!
//! Every draw comes from an [`RngStream`]: a ChaCha8 generator keyed by a
//! master seed and selected by a 64-bit stream id. Estimators index their
//! samples and give sample i the stream `base ^ i`, so how samples are
//! spread across worker threads cannot change any result.

mod cache;
mod constants;

pub use cache::{CachedConstant, ConstantCache};
pub use constants::{estimate_order_constant, estimate_zeta};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ChannelConfig;
use crate::detkit::OrderedSpectrum;
use crate::error::{domain, Result};

/// Key of an independent random sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngStream { master_seed, stream_id }
    }

    /// The stream of sample `index` under the given base.
    pub fn indexed(master_seed: u64, base: u64, index: u64) -> Self {
        RngStream { master_seed, stream_id: base ^ index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Builds a stream base from a purpose tag and a point index, leaving the
/// low 32 bits for sample indices.
pub fn stream_base(tag: u16, point: u16) -> u64 {
    (u64::from(tag) << 48) | (u64::from(point) << 32)
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl McEstimate {
    /// Mean and std-error of the samples, summed in index order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        assert!(n >= 2, "an estimate needs at least two samples");
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        McEstimate { mean, std_error: (var / n as f64).sqrt(), n_samples: n }
    }

    /// A known constant (zero uncertainty).
    pub fn exact(value: f64) -> Self {
        McEstimate { mean: value, std_error: 0.0, n_samples: 0 }
    }
}

/// Evaluates `f(stream_i)` for i in 0..n in parallel and returns the values
/// in index order.
pub fn par_samples<F>(n: usize, master_seed: u64, base: u64, f: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| f(&mut RngStream::indexed(master_seed, base, i).rng()))
        .collect()
}

pub(crate) fn cgauss<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub(crate) fn cgauss_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<Complex64> {
    // Column-major fill order is part of the determinism contract.
    DMatrix::from_fn(rows, cols, |_, _| cgauss(rng))
}

/// rows×cols matrix of i.i.d. CN(0, 1) entries.
pub fn sample_cgauss(rows: usize, cols: usize, stream: RngStream) -> DMatrix<Complex64> {
    cgauss_matrix(rows, cols, &mut stream.rng())
}

/// Haar-distributed n×τ matrix with orthonormal rows.
pub fn sample_stiefel(n: usize, tau: usize, stream: RngStream) -> Result<DMatrix<Complex64>> {
    if n > tau {
        return Err(domain(format!("Stiefel manifold needs n <= tau, got {n} > {tau}")));
    }
    Ok(stiefel(n, tau, &mut stream.rng()))
}

/// Gram–Schmidt (with one reorthogonalization pass) on the rows of a
/// complex Gaussian matrix: the Q factor of the unique QR decomposition
/// with positive real diagonal, hence Haar on the Stiefel manifold.
pub(crate) fn stiefel<R: Rng>(n: usize, tau: usize, rng: &mut R) -> DMatrix<Complex64> {
    let mut v = cgauss_matrix(n, tau, rng);
    for i in 0..n {
        for _pass in 0..2 {
            for j in 0..i {
                let proj: Complex64 = (0..tau).map(|t| v[(i, t)] * v[(j, t)].conj()).sum();
                for t in 0..tau {
                    let vj = v[(j, t)];
                    v[(i, t)] -= proj * vj;
                }
            }
        }
        let norm = (0..tau).map(|t| v[(i, t)].norm_sqr()).sum::<f64>().sqrt();
        for t in 0..tau {
            v[(i, t)] /= norm;
        }
    }
    v
}

/// MAC-USTM input: user k sends √(τρ/n)·Vₖ with Vₖ Haar on S(nₖ, τ); the
/// blocks are stacked into an n×τ matrix.
pub fn sample_mac_ustm_input(cfg: &ChannelConfig, rho: f64, stream: RngStream) -> Result<DMatrix<Complex64>> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(domain(format!("SNR must be positive, got {rho}")));
    }
    Ok(mac_ustm_input(cfg, rho, &mut stream.rng()))
}

pub(crate) fn mac_ustm_input<R: Rng>(cfg: &ChannelConfig, rho: f64, rng: &mut R) -> DMatrix<Complex64> {
    let scale = (cfg.tau as f64 * rho / cfg.n() as f64).sqrt();
    let mut x = DMatrix::zeros(cfg.n(), cfg.tau);
    let mut row = 0;
    for &nk in &cfg.per_user_antennas {
        let v = stiefel(nk, cfg.tau, rng);
        x.rows_mut(row, nk).copy_from(&(v * Complex64::new(scale, 0.0)));
        row += nk;
    }
    x
}

/// Singular values of √(ρ/n)·G, G n×τ i.i.d. CN(0,1), in decreasing order.
pub fn sample_gaussian_input_spectrum(cfg: &ChannelConfig, rho: f64, stream: RngStream) -> Result<OrderedSpectrum> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(domain(format!("SNR must be positive, got {rho}")));
    }
    let x = gaussian_input(cfg, rho, &mut stream.rng());
    let d: Vec<f64> = gram_eigenvalues_desc(&x).into_iter().map(|e| e.max(0.0).sqrt()).collect();
    OrderedSpectrum::new(d)
}

pub(crate) fn gaussian_input<R: Rng>(cfg: &ChannelConfig, rho: f64, rng: &mut R) -> DMatrix<Complex64> {
    let scale = (rho / cfg.n() as f64).sqrt();
    cgauss_matrix(cfg.n(), cfg.tau, rng) * Complex64::new(scale, 0.0)
}

/// Eigenvalues of A·A† in decreasing order.
pub(crate) fn gram_eigenvalues_desc(a: &DMatrix<Complex64>) -> Vec<f64> {
    hermitian_eigenvalues_desc(&(a * a.adjoint()))
}

pub(crate) fn hermitian_eigenvalues_desc(h: &DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = if h.nrows() == 1 {
        vec![h[(0, 0)].re]
    } else {
        SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect()
    };
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}
