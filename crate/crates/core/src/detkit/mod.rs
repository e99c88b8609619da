//! Determinant machinery: Vandermonde products, κ, signed-log elimination,
//! the Γ̃-matrix of the USTM output density, the Rₖ construction behind the
//! closed-form E[ln det(XLX†)], and the determinant-integral identities used
//! as oracles.

pub mod andreief;
pub mod quadform;
mod logdet;
pub mod mmatrix;
pub mod quad;

pub use andreief::{andreief_check, det_ratio_limit, RatioLimit, SmoothFn};
pub use quadform::{
    build_hk, build_rk, exp_logdet_gauss_quadratic, exp_logdet_quadratic_form, perturbed_exp_logdet, Perturbed,
};
pub use logdet::{signed_logdet, signed_logdet_real, LogDet};
pub use mmatrix::{build_m, MKernel};

use crate::error::{domain, Error, Result};
use crate::specfn::LogValue;

/// Determinants are carried as signed logs.
pub type SignedLogDet = LogValue;

/// Strictly decreasing, strictly positive list of eigenvalues / singular values.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedSpectrum(Vec<f64>);

/// Singular values of an input matrix; same invariants as [`OrderedSpectrum`].
pub type DiagSpectrum = OrderedSpectrum;

impl OrderedSpectrum {
    /// Validates an already-ordered list.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(domain("spectrum must be nonempty"));
        }
        for &v in &values {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("spectrum entries must be finite and positive, got {v}")));
            }
        }
        for (i, w) in values.windows(2).enumerate() {
            let tol = 4.0 * f64::EPSILON * w[0].abs();
            if (w[0] - w[1]).abs() <= tol {
                return Err(Error::DegenerateSpectrum { i, j: i + 1, value: w[0] });
            }
            if w[0] < w[1] {
                return Err(domain(format!("spectrum not decreasing at index {i}: {} < {}", w[0], w[1])));
            }
        }
        Ok(OrderedSpectrum(values))
    }

    /// Sorts into decreasing order, then validates.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(|a, b| b.total_cmp(a));
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Δ(A) = Π_{i<j} (aᵢ − aⱼ); positive for a decreasing spectrum.
pub fn vandermonde(spec: &OrderedSpectrum) -> SignedLogDet {
    LogValue::from_ln(ln_vandermonde(spec.values()))
}

/// κ(A, k) = Δ(A) · det(A)ᵏ.
pub fn kappa(spec: &OrderedSpectrum, k: usize) -> SignedLogDet {
    LogValue::from_ln(ln_kappa(spec.values(), k))
}

/// ln Δ for a slice the caller guarantees is strictly decreasing.
pub(crate) fn ln_vandermonde(a: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            acc += (a[i] - a[j]).ln();
        }
    }
    acc
}

pub(crate) fn ln_kappa(a: &[f64], k: usize) -> f64 {
    ln_vandermonde(a) + k as f64 * a.iter().map(|x| x.ln()).sum::<f64>()
}
