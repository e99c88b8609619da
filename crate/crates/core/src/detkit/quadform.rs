//! E[ln det(X L X†)] for X an n×m standard complex Gaussian matrix.
//!
//! Two engines are provided. The closed form assembles the Rₖ matrices and
//! is exact in exact arithmetic, but its prefactor 1/κ(L₀ − I, m − n) cancels
//! against Σₖ det Rₖ, so it loses roughly one digit per factor of ten of
//! closeness between eigenvalues (and between eigenvalues and 1). The
//! divided-difference engine evaluates the same quantity as
//!
//!   Σ_{j=1}^{n} ψ(j) + Σ_{e=m−n}^{m−1} [xᵉ] p_e(x),
//!
//! where p_e interpolates xᵉ ln x on the full spectrum of L (confluent
//! nodes allowed), with divided differences of nearby nodes taken from a
//! Taylor expansion instead of the subtractive recurrence. It stays
//! accurate through exact repeats.

use nalgebra::DMatrix;

use super::logdet::signed_logdet_real;
use super::{ln_kappa, OrderedSpectrum};
use crate::error::{dimension, domain, Error, Result};
use crate::specfn::{digamma_unchecked, log_beta, log_gamma, LogValue};

/// Rₖ(A) = Pₖ(A) − Q(A) S⁻¹ Tₖ for spectrum `a` (all entries > 1), column
/// index `k` (1-based) and ambient dimension `tau_total` > len(a).
pub fn build_rk(a: &OrderedSpectrum, k: usize, tau_total: usize) -> Result<DMatrix<f64>> {
    let a = a.values();
    let m = a.len();
    if tau_total <= m {
        return Err(dimension(format!("ambient dimension {tau_total} must exceed spectrum length {m}")));
    }
    if k == 0 || k > m {
        return Err(domain(format!("column index {k} outside 1..={m}")));
    }
    if let Some(&bad) = a.iter().find(|&&x| x <= 1.0) {
        return Err(domain(format!("entries must exceed 1, got {bad}")));
    }
    let tau = tau_total;
    let t = tau - m;
    let psi = |x: usize| digamma_unchecked(x as f64);
    let inv_beta = |x: usize, y: usize| -> f64 { (-log_beta(x as f64, y as f64).expect("positive args")).exp() };

    let p = DMatrix::from_fn(m, m, |i, j| {
        let col = j + 1;
        let e = (m - col + 1) as i32;
        if col == k {
            a[i].powi(e) * (a[i].ln() + psi(m - k + 1))
        } else {
            a[i].powi(e)
        }
    });
    let tk = DMatrix::from_fn(t, m, |i, j| {
        let (row, col) = (i + 1, j + 1);
        match (row < t, col == k) {
            (true, false) => inv_beta(m - col + 1, tau - m - row),
            (true, true) => psi(tau - row - k + 1) * inv_beta(m - k + 1, tau - m - row),
            (false, false) => 1.0,
            (false, true) => psi(m - k + 1),
        }
    });
    let q = DMatrix::from_fn(m, t, |i, j| {
        let col = (j + 1) as i32;
        (-a[i]).powi(col + m as i32 - tau as i32)
    });
    let s = DMatrix::from_fn(t, t, |i, j| {
        if j > i {
            return 0.0;
        }
        let (row, col) = (i + 1, j + 1);
        let sgn = if (row - col) % 2 == 0 { 1.0 } else { -1.0 };
        if row < t {
            sgn * inv_beta(row - col + 1, tau - m - row)
        } else {
            sgn
        }
    });
    let sol = forward_substitute(&s, &tk);
    Ok(p - q * sol)
}

/// Solves S X = B for lower-triangular S.
fn forward_substitute(s: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut acc = x[(i, c)];
            for j in 0..i {
                acc -= s[(i, j)] * x[(j, c)];
            }
            x[(i, c)] = acc / s[(i, i)];
        }
    }
    x
}

/// The m×m matrix Hₖ(L₀) whose determinant equals γ̃(n)γ̃(m−n)·det Rₖ(L₀).
/// Exposed for verification of that identity.
pub fn build_hk(l0: &OrderedSpectrum, m_ambient: usize, k: usize) -> Result<DMatrix<f64>> {
    let l = l0.values();
    let n = l.len();
    let m = m_ambient;
    if m <= n {
        return Err(dimension(format!("ambient dimension {m} must exceed {n}")));
    }
    if k == 0 || k > n {
        return Err(domain(format!("column index {k} outside 1..={n}")));
    }
    let gamma = |x: usize| log_gamma(x as f64).expect("positive").exp();
    let psi = |x: usize| digamma_unchecked(x as f64);
    Ok(DMatrix::from_fn(m, m, |i0, j0| {
        let (i, j) = (i0 + 1, j0 + 1);
        let li = if i <= n { l[i - 1] } else { 0.0 };
        if j == k {
            if i <= n {
                gamma(n - k + 1) * li.powi((n - k + 1) as i32) * (li.ln() + psi(n - k + 1))
            } else {
                gamma(m - i + n - k + 1) * psi(m - i + n - k + 1)
            }
        } else if j <= n {
            if i <= n {
                gamma(n - j + 1) * li.powi((n - j + 1) as i32)
            } else {
                gamma(m - i + n - j + 1)
            }
        } else if i <= n {
            (-li).powi(j as i32 - m as i32)
        } else if j <= i {
            let sgn = if (i - j) % 2 == 0 { 1.0 } else { -1.0 };
            sgn * gamma(m - j + 1) / gamma(i - j + 1)
        } else {
            0.0
        }
    }))
}

/// Closed-form E[ln det(X L X†)] where L has eigenvalues `l0` (all > 1,
/// distinct) followed by m − n ones.
pub fn exp_logdet_gauss_quadratic(l0: &OrderedSpectrum, m_ambient: usize) -> Result<f64> {
    closed_form_terms(l0, m_ambient).map(|(v, _)| v)
}

/// Closed form plus the largest digit loss seen in the det Rₖ eliminations.
pub(crate) fn closed_form_terms(l0: &OrderedSpectrum, m_ambient: usize) -> Result<(f64, f64)> {
    let n = l0.len();
    let m = m_ambient;
    if m <= n {
        return Err(dimension(format!("ambient dimension {m} must exceed {n}")));
    }
    let mut dets = Vec::with_capacity(n);
    let mut lost: f64 = 0.0;
    for k in 1..=n {
        let d = signed_logdet_real(&build_rk(l0, k, m)?);
        lost = lost.max(d.digits_lost);
        dets.push(d.value);
    }
    let shifted: Vec<f64> = l0.values().iter().map(|x| x - 1.0).collect();
    let ln_pref =
        (m - n - 1) as f64 * l0.values().iter().map(|x| x.ln()).sum::<f64>() - ln_kappa(&shifted, m - n);
    Ok(((LogValue::sum(dets).scale_ln(ln_pref)).to_f64(), lost))
}

/// Rough count of decimal digits the closed form cancels for this spectrum.
pub(crate) fn closed_form_digit_loss(l0: &[f64], m_ambient: usize) -> f64 {
    let n = l0.len();
    let mut loss = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            loss += (l0[i].max(l0[j]) / (l0[i] - l0[j]).abs()).log10();
        }
        loss += (m_ambient - n) as f64 * (l0[i] / (l0[i] - 1.0)).log10();
    }
    loss
}

/// E[ln det(X L X†)] for X n×m standard complex Gaussian and L with the
/// given m positive eigenvalues (any order, repeats allowed).
pub fn exp_logdet_quadratic_form(l: &[f64], n: usize) -> Result<f64> {
    let m = l.len();
    if n == 0 || n > m {
        return Err(dimension(format!("need 1 <= n <= m, got n={n}, m={m}")));
    }
    if let Some(&bad) = l.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(domain(format!("eigenvalues must be finite and positive, got {bad}")));
    }
    let mut pts = l.to_vec();
    pts.sort_by(f64::total_cmp);

    // eₛ(x₀..x_{i−1}) for all i ≤ m, s ≤ i.
    let mut esym = vec![vec![0.0; m + 1]; m + 1];
    esym[0][0] = 1.0;
    for i in 1..=m {
        esym[i][0] = 1.0;
        for s in 1..=i {
            esym[i][s] = esym[i - 1][s] + pts[i - 1] * esym[i - 1][s - 1];
        }
    }

    let mut total: f64 = (1..=n).map(|j| digamma_unchecked(j as f64)).sum();
    let mut table = vec![0.0; m * m];
    for e in m - n..m {
        prefix_divided_differences(e, &pts, &mut table);
        let mut coeff = 0.0;
        for i in e..m {
            let s = i - e;
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            coeff += table[i] * sign * esym[i][s];
        }
        total += coeff;
    }
    Ok(total)
}

/// Relative spread below which divided differences come from the Taylor
/// expansion about the midpoint.
const TAYLOR_SPREAD: f64 = 0.6;

/// Fills `table[i*m + j]` with f[xᵢ..xⱼ] for f(x) = xᵉ ln x; on return
/// `table[j]` (row 0) holds the prefix differences f[x₀..xⱼ].
fn prefix_divided_differences(e: usize, pts: &[f64], table: &mut [f64]) {
    let m = pts.len();
    for len in 1..=m {
        for i in 0..=m - len {
            let j = i + len - 1;
            let (lo, hi) = (pts[i], pts[j]);
            let c = 0.5 * (lo + hi);
            table[i * m + j] = if (hi - lo) / c < TAYLOR_SPREAD {
                taylor_divided_difference(e, &pts[i..=j], c)
            } else {
                (table[(i + 1) * m + j] - table[i * m + j - 1]) / (hi - lo)
            };
        }
    }
}

/// f[x₁..x_k] for f(x) = xᵉ ln x via Σ_{N≥k−1} a_N h_{N−k+1}(x − c), with
/// a_N the Taylor coefficients of f at c and h the complete homogeneous
/// symmetric polynomials. Offsets are scaled by c so the coefficients are
/// O(1).
fn taylor_divided_difference(e: usize, pts: &[f64], c: f64) -> f64 {
    let k = pts.len();
    let u: Vec<f64> = pts.iter().map(|x| (x - c) / c).collect();
    let umax = u.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let lnc = c.ln();
    let harmonic = |q: usize| (1..=q).map(|i| 1.0 / i as f64).sum::<f64>();
    let he = harmonic(e);

    // hs[s] = h_r(u₁..u_{s+1}) for the current r, advanced one r at a time.
    let mut hs = vec![1.0; k];
    let mut sum = 0.0;
    let mut n = k - 1;
    loop {
        let r = n + 1 - k;
        if r > 0 {
            let mut prev_row = 0.0;
            for (s, h) in hs.iter_mut().enumerate() {
                let v = prev_row + u[s] * *h;
                *h = v;
                prev_row = v;
            }
        }
        let coef = if n <= e {
            binom(e, n) * (lnc + he - harmonic(e - n))
        } else {
            let sign = if (n - 1 - e).is_multiple_of(2) { 1.0 } else { -1.0 };
            sign / (n as f64 * binom(n - 1, e))
        };
        sum += coef * hs[k - 1];
        if n > e.max(k) {
            let bound = coef.abs() * binom(n, k - 1) * umax.powi(r as i32);
            if bound <= 1e-17 * sum.abs() || umax == 0.0 || n > 2000 {
                break;
            }
        }
        n += 1;
    }
    sum * c.powi(e as i32 - k as i32 + 1)
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Result of an ε-separated, Richardson-extrapolated evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbed {
    pub value: f64,
    /// |extrapolated − finer evaluation|; zero when nothing was perturbed.
    pub error_estimate: f64,
}

/// Relative spacing used to separate coincident eigenvalues.
pub const PERTURBATION_EPS: f64 = 1e-5;

/// E[ln det(X L X†)] where L has eigenvalues `l` (entries ≥ 1, repeats
/// allowed) followed by ones up to `m_ambient`.
///
/// Coincident entries (and entries equal to 1) are separated by relative
/// spacing ε and ε/2, each separated spectrum is evaluated, and the pair is
/// Richardson-extrapolated. Symmetric separation of an interior cluster
/// leaves no first-order error (the target is symmetric in the
/// eigenvalues), so those use a second-order combination; clusters pinned
/// at 1 are separated one-sidedly and use first order.
pub fn perturbed_exp_logdet(l: &[f64], m_ambient: usize) -> Result<Perturbed> {
    let n = l.len();
    if n == 0 || n > m_ambient {
        return Err(dimension(format!("need 1 <= len(l) <= m, got {n} and {m_ambient}")));
    }
    if let Some(&bad) = l.iter().find(|x| !(**x >= 1.0 && x.is_finite())) {
        return Err(domain(format!("entries must be >= 1, got {bad}")));
    }
    let mut sorted = l.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let clusters = clusters_of(&sorted);
    let repeats = clusters.iter().any(|c| c.len > 1 || c.at_one);
    let full = |v: &[f64]| {
        let mut all = v.to_vec();
        all.resize(m_ambient, 1.0);
        exp_logdet_quadratic_form(&all, n)
    };
    if !repeats {
        return Ok(Perturbed { value: full(&sorted)?, error_estimate: 0.0 });
    }
    let one_sided = clusters.iter().any(|c| c.at_one);
    let coarse = full(&separate(&sorted, &clusters, PERTURBATION_EPS))?;
    let fine = full(&separate(&sorted, &clusters, 0.5 * PERTURBATION_EPS))?;
    let order = if one_sided { 1 } else { 2 };
    let value = fine + (fine - coarse) / (f64::from(1u32 << order) - 1.0);
    if !value.is_finite() {
        return Err(Error::PerturbationInstability { delta: f64::INFINITY, std_error: 0.0 });
    }
    Ok(Perturbed { value, error_estimate: (value - fine).abs() })
}

struct Cluster {
    start: usize,
    len: usize,
    at_one: bool,
}

fn clusters_of(sorted_desc: &[f64]) -> Vec<Cluster> {
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    let mut out: Vec<Cluster> = Vec::new();
    for (i, &v) in sorted_desc.iter().enumerate() {
        match out.last_mut() {
            Some(c) if same(sorted_desc[c.start], v) => c.len += 1,
            _ => out.push(Cluster { start: i, len: 1, at_one: false }),
        }
    }
    for c in &mut out {
        c.at_one = same(sorted_desc[c.start], 1.0);
    }
    out
}

fn separate(sorted_desc: &[f64], clusters: &[Cluster], eps: f64) -> Vec<f64> {
    let mut out = sorted_desc.to_vec();
    for c in clusters {
        let v = sorted_desc[c.start];
        for s in 0..c.len {
            out[c.start + s] = if c.at_one {
                1.0 + eps * (c.len - s) as f64
            } else {
                v * (1.0 + eps * ((c.len - 1) as f64 / 2.0 - s as f64))
            };
        }
    }
    out
}
