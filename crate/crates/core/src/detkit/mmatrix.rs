//! The p×p matrix M(A, B) whose determinant (over κ-normalizations) is the
//! Stiefel-averaged exponential integral behind the USTM output density:
//!
//! * Γ̃(aᵢbⱼ, τ−p) for i ≤ r, j ≤ n,
//! * bⱼ^{τ−i} for r < i ≤ p,
//! * aᵢ^{τ−j} for n < j ≤ p.

use nalgebra::DMatrix;

use super::logdet::{logdet_row_major, LogDet, Scratch};
use super::OrderedSpectrum;
use crate::error::{dimension, Result};
use crate::specfn::{ln_factorial, ln_lower_reg_gamma, ln_upper_exp_tail, LogValue};

/// M(A, B) with signed-log entries.
pub fn build_m(a: &OrderedSpectrum, b: &OrderedSpectrum, tau: usize) -> Result<DMatrix<LogValue>> {
    let (a, b) = (a.values(), b.values());
    let (r, n) = (a.len(), b.len());
    let p = r.max(n);
    if tau < p {
        return Err(dimension(format!("tau = {tau} is below max(r, n) = {p}")));
    }
    let k = tau - p;
    Ok(DMatrix::from_fn(p, p, |i, j| {
        if i < r && j < n {
            LogValue::from_ln(ln_upper_exp_tail(a[i] * b[j], k))
        } else if i >= r && j < n {
            LogValue::from_ln((tau - i - 1) as f64 * b[j].ln())
        } else if i < r && j >= n {
            LogValue::from_ln((tau - j - 1) as f64 * a[i].ln())
        } else {
            LogValue::ZERO
        }
    }))
}

/// Columns whose b-values lie within this many units of 1/max(a) are
/// grouped and replaced by Newton divided differences.
const CLUSTER_WIDTH: f64 = 2.0;
/// ... provided the group's spread stays below this fraction of its centre.
const CLUSTER_REL_SPREAD: f64 = 0.5;
/// Highest Taylor order kept beyond τ − p.
const TAYLOR_EXTRA: usize = 64;

/// Reusable evaluator of det M(A, B) / Δ(B) for fixed (r, n, τ).
///
/// Dividing by Δ(B) is done analytically for clustered b-values, so the
/// ratio stays accurate when b-values nearly or exactly coincide (the
/// confluent limit is the derivative-column determinant).
pub struct MKernel {
    tau: usize,
    r: usize,
    n: usize,
    p: usize,
    ln: Vec<f64>,
    sign: Vec<i8>,
    h: Vec<f64>,
    lnp: Vec<f64>,
    scratch: Scratch,
}

impl MKernel {
    pub fn new(r: usize, n: usize, tau: usize) -> Result<Self> {
        let p = r.max(n);
        if r == 0 || n == 0 {
            return Err(dimension("M requires r, n >= 1"));
        }
        if tau < p {
            return Err(dimension(format!("tau = {tau} is below max(r, n) = {p}")));
        }
        Ok(MKernel {
            tau,
            r,
            n,
            p,
            ln: vec![0.0; p * p],
            sign: vec![0; p * p],
            h: Vec::new(),
            lnp: Vec::new(),
            scratch: Scratch::default(),
        })
    }

    /// det M(a, b) / Δ(b) for decreasing `a` (length r) and nonincreasing
    /// `b` (length n); repeated b-values give the confluent limit.
    pub fn det_over_vandermonde(&mut self, a: &[f64], b: &[f64]) -> LogDet {
        debug_assert_eq!(a.len(), self.r);
        debug_assert_eq!(b.len(), self.n);
        let (p, r, n, tau) = (self.p, self.r, self.n, self.tau);
        let k_ord = tau - p;
        let a_max = a.iter().fold(0.0f64, |m, &x| m.max(x));

        // Trailing a-power columns.
        for j in n..p {
            for i in 0..p {
                let idx = i * p + j;
                if i < r {
                    self.ln[idx] = (tau - j - 1) as f64 * a[i].ln();
                    self.sign[idx] = 1;
                } else {
                    self.ln[idx] = f64::NEG_INFINITY;
                    self.sign[idx] = 0;
                }
            }
        }

        let mut ln_ratio = 0.0;
        let mut flip = false;
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n {
                let w = b[start] - b[end];
                let centre = 0.5 * (b[start] + b[end]);
                if w * a_max <= CLUSTER_WIDTH && w <= CLUSTER_REL_SPREAD * centre {
                    end += 1;
                } else {
                    break;
                }
            }
            let len = end - start;
            if len == 1 {
                self.fill_plain_column(a, b[start], start);
            } else {
                self.fill_newton_columns(a, &b[start..end], start, k_ord);
                if (len * (len - 1) / 2) % 2 == 1 {
                    flip = !flip;
                }
            }
            // Remove cross-cluster Vandermonde factors.
            for s in start..end {
                for t in end..n {
                    ln_ratio -= (b[s] - b[t]).ln();
                }
            }
            start = end;
        }

        let mut det = logdet_row_major(&self.ln, &self.sign, p, &mut self.scratch);
        det.value = det.value.scale_ln(ln_ratio);
        if flip {
            det.value = -det.value;
        }
        det
    }

    fn fill_plain_column(&mut self, a: &[f64], bj: f64, col: usize) {
        let (p, r, tau) = (self.p, self.r, self.tau);
        let k_ord = tau - p;
        for i in 0..p {
            let idx = i * p + col;
            self.ln[idx] = if i < r { ln_upper_exp_tail(a[i] * bj, k_ord) } else { (tau - i - 1) as f64 * bj.ln() };
            self.sign[idx] = if self.ln[idx] == f64::NEG_INFINITY { 0 } else { 1 };
        }
    }

    /// Column `first + q` becomes φ[b₀..b_q], expanded about the cluster
    /// centre c: Σ_{N≥q} φ⁽ᴺ⁾(c)/N! · h_{N−q}(b₀ − c, …, b_q − c).
    fn fill_newton_columns(&mut self, a: &[f64], bs: &[f64], first: usize, k_ord: usize) {
        let (p, r, tau) = (self.p, self.r, self.tau);
        let len = bs.len();
        let c = 0.5 * (bs[0] + bs[len - 1]);
        let ymax = bs.iter().fold(0.0f64, |m, &x| m.max((x - c).abs()));
        let rmax = k_ord.max(tau) + TAYLOR_EXTRA;

        // h[q * (rmax+1) + s] = h_s(y₀..y_q)
        let stride = rmax + 1;
        self.h.clear();
        self.h.resize(len * stride, 0.0);
        for q in 0..len {
            let y = bs[q] - c;
            self.h[q * stride] = 1.0;
            for s in 1..=rmax {
                let prev_pt = if q > 0 { self.h[(q - 1) * stride + s] } else { 0.0 };
                self.h[q * stride + s] = prev_pt + y * self.h[q * stride + s - 1];
            }
        }

        for i in 0..p {
            if i < r {
                // ln c_N = N ln a − ln N! + x + ln P(K − N, x), P(≤ 0, ·) = 1.
                let ai = a[i];
                let x = ai * c;
                let lnx = x.ln();
                let lna = ai.ln();
                self.lnp.clear();
                self.lnp.resize(k_ord + 1, 0.0);
                // lnp[s] = ln P(s, x)
                if k_ord > 0 {
                    self.lnp[k_ord] = ln_lower_reg_gamma(k_ord, x);
                    for s in (1..k_ord).rev() {
                        let add = -x + s as f64 * lnx - ln_factorial(s);
                        self.lnp[s] = log_add(self.lnp[s + 1], add);
                    }
                }
                let ln_c = |nn: usize, lnp: &[f64]| {
                    let tail = if nn >= k_ord { 0.0 } else { lnp[k_ord - nn] };
                    nn as f64 * lna - ln_factorial(nn) + x + tail
                };
                for q in 0..len {
                    let anchor = ln_c(q, &self.lnp);
                    let mut sum = 0.0;
                    let mut nn = q;
                    while nn - q <= rmax {
                        let lc = ln_c(nn, &self.lnp);
                        let rel = (lc - anchor).exp();
                        sum += rel * self.h[q * stride + nn - q];
                        if nn > k_ord + q {
                            let bound = rel * binom(nn, q) * ymax.powi((nn - q) as i32);
                            if bound <= 1e-17 * sum.abs() || ymax == 0.0 {
                                break;
                            }
                        }
                        nn += 1;
                    }
                    let v = LogValue::from_f64(sum).scale_ln(anchor);
                    self.ln[i * p + first + q] = v.ln_abs;
                    self.sign[i * p + first + q] = v.sign;
                }
            } else {
                // bᵉ with e = τ − i − 1: c_N = C(e, N) c^{e−N}.
                let e = tau - i - 1;
                for q in 0..len {
                    let mut sum = 0.0;
                    for nn in q..=e {
                        sum += binom(e, nn) * c.powi((e - nn) as i32) * self.h[q * stride + nn - q];
                    }
                    let v = LogValue::from_f64(sum);
                    self.ln[i * p + first + q] = v.ln_abs;
                    self.sign[i * p + first + q] = v.sign;
                }
            }
        }
    }
}

fn log_add(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detkit::{ln_vandermonde, signed_logdet};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(v: &[f64]) -> OrderedSpectrum {
        OrderedSpectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn examples() {
        let m = build_m(&spec(&[1.0]), &spec(&[1.0]), 3).unwrap();
        assert_relative_eq!(m[(0, 0)].to_f64(), std::f64::consts::E - 2.0, max_relative = 1e-14);

        let e = std::f64::consts::E;
        let m = build_m(&spec(&[2.0, 1.0]), &spec(&[1.0]), 3).unwrap();
        let want = [[e * e - 1.0, 2.0], [e - 1.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(m[(i, j)].to_f64(), want[i][j], max_relative = 1e-14);
            }
        }
        // swapping roles of a and b transposes the matrix
        let mt = build_m(&spec(&[1.0]), &spec(&[2.0, 1.0]), 3).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(mt[(j, i)].to_f64(), want[i][j], max_relative = 1e-14);
            }
        }
        assert!(build_m(&spec(&[2.0, 1.0]), &spec(&[1.0]), 1).is_err());
    }

    #[test]
    fn entries_telescope() {
        let a = spec(&[7.0, 2.0, 0.3]);
        let b = spec(&[0.9, 0.4]);
        let tau = 6;
        let m = build_m(&a, &b, tau).unwrap();
        let k = tau - 3;
        for i in 0..3 {
            for j in 0..2 {
                let x = a.values()[i] * b.values()[j];
                let next = LogValue::from_ln(ln_upper_exp_tail(x, k + 1));
                let step = LogValue::from_ln(k as f64 * x.ln() - ln_factorial(k));
                assert_relative_eq!(m[(i, j)].ln_abs, next.add(step).ln_abs, max_relative = 1e-12);
            }
        }
    }

    fn generic_ratio(a: &[f64], b: &[f64], tau: usize) -> LogValue {
        let det = signed_logdet(&build_m(&spec(a), &spec(b), tau).unwrap()).value;
        det.scale_ln(-ln_vandermonde(b))
    }

    #[test]
    fn kernel_matches_generic_path_when_separated() {
        let cases: [(&[f64], &[f64], usize); 4] = [
            (&[9.0, 4.0], &[0.9, 0.2], 4),
            (&[30.0, 12.0, 3.0], &[0.95, 0.5], 5),
            (&[5.0], &[0.8, 0.3, 0.1], 6),
            (&[2.0, 1.5, 0.2, 0.1], &[0.99, 0.7, 0.4, 0.05], 10),
        ];
        for (a, b, tau) in cases {
            let mut k = MKernel::new(a.len(), b.len(), tau).unwrap();
            let fast = k.det_over_vandermonde(a, b).value;
            let slow = generic_ratio(a, b, tau);
            assert_eq!(fast.sign, slow.sign);
            assert_relative_eq!(fast.ln_abs, slow.ln_abs, max_relative = 1e-10, epsilon = 1e-9);
        }
    }

    #[test]
    fn kernel_confluent_limit() {
        // Close b-values: the kernel converges to its exact-repeat value, and
        // at moderate separation agrees with the generic elimination.
        let a = [40.0, 25.0, 11.0, 3.0];
        let tau = 10;
        let mut k = MKernel::new(4, 4, tau).unwrap();
        let exact = k.det_over_vandermonde(&a, &[0.9, 0.9, 0.9, 0.5]).value;
        assert_eq!(exact.sign, 1);
        for eps in [1e-2, 1e-4, 1e-6, 1e-9] {
            let b = [0.9 + eps, 0.9, 0.9 - eps, 0.5];
            let v = k.det_over_vandermonde(&a, &b).value;
            assert!((v.ln_abs - exact.ln_abs).abs() < 50.0 * eps, "eps {eps}");
            if eps >= 1e-4 {
                let g = generic_ratio(&a, &b, tau);
                assert!((g.ln_abs - v.ln_abs).abs() < 1e-6, "eps {eps}: {} vs {}", g.ln_abs, v.ln_abs);
            }
        }
    }

    #[test]
    fn kernel_low_snr_regime() {
        // Tiny b (low SNR): entries are (ab)^K/K! to leading order.
        let a = [6.0, 2.5];
        let b = [2e-5, 1.5e-5];
        let mut k = MKernel::new(2, 2, 4).unwrap();
        let v = k.det_over_vandermonde(&a, &b).value;
        let g = generic_ratio(&a, &b, 4);
        assert_eq!(v.sign, 1);
        assert_relative_eq!(v.ln_abs, g.ln_abs, max_relative = 1e-6);
    }

    proptest! {
        #[test]
        fn kernel_matches_generic_on_random_inputs(
            a in proptest::collection::vec(0.1f64..50.0, 1..=4),
            b in proptest::collection::vec(0.01f64..0.99, 1..=4),
            extra in 0usize..5,
        ) {
            let mut a = a; a.sort_by(|x, y| y.total_cmp(x)); a.dedup_by(|x, y| (*y - *x).abs() < 0.05);
            let mut b = b; b.sort_by(|x, y| y.total_cmp(x)); b.dedup_by(|x, y| (*y - *x).abs() < 0.02);
            let tau = a.len().max(b.len()) + extra;
            let mut k = MKernel::new(a.len(), b.len(), tau).unwrap();
            let fast = k.det_over_vandermonde(&a, &b);
            let slow = generic_ratio(&a, &b, tau);
            prop_assume!(!fast.ill_conditioned());
            prop_assert_eq!(fast.value.sign, slow.sign);
            prop_assert!((fast.value.ln_abs - slow.ln_abs).abs() < 1e-7 * (1.0 + slow.ln_abs.abs()));
        }
    }
}
