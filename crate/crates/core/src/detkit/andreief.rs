//! Determinant-integral identities used as oracles: the generalized
//! Andreief identity and the confluent limit of det[fᵢ(aⱼ)]/Δ(A).

use std::cell::RefCell;

use nalgebra::DMatrix;

use super::quad::{integrate_with, GaussLegendre};
use super::{ln_vandermonde, OrderedSpectrum};
use crate::error::{dimension, Error, Result};
use crate::specfn::log_gamma_product;

/// A scalar function that may know its own derivatives.
pub trait SmoothFn: Sync {
    fn value(&self, x: f64) -> f64;

    /// Exact k-th derivative if available; `None` falls back to finite
    /// differences.
    fn derivative(&self, _order: usize, _x: f64) -> Option<f64> {
        None
    }
}

impl<F: Fn(f64) -> f64 + Sync> SmoothFn for F {
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

const QUAD_TOL: f64 = 1e-12;

/// Evaluates both sides of
///
///   ∫_{a ≤ xₙ < … < x₁ < b} det A(x) det B(x) dx = det E,
///
/// where A is m×m with Aᵢⱼ = fᵢ(xⱼ) for j ≤ n and the given constants
/// otherwise, B is n×n with Bᵢⱼ = gᵢ(xⱼ), and E has ∫fᵢgⱼ in its first n
/// columns and the same constants after. `constants` is m×(m−n).
///
/// The left side is a nested adaptive quadrature, practical for n ≤ 3.
pub fn andreief_check(
    f: &[&dyn SmoothFn],
    g: &[&dyn SmoothFn],
    constants: &DMatrix<f64>,
    a: f64,
    b: f64,
    quad_points: usize,
) -> Result<(f64, f64)> {
    let m = f.len();
    let n = g.len();
    if n == 0 || n > m {
        return Err(dimension(format!("need 1 <= n <= m, got n={n}, m={m}")));
    }
    if constants.nrows() != m || constants.ncols() != m - n {
        return Err(dimension(format!(
            "constants must be {m}x{}, got {}x{}",
            m - n,
            constants.nrows(),
            constants.ncols()
        )));
    }
    if n > 3 {
        return Err(dimension("nested quadrature supports n <= 3"));
    }
    let rule = GaussLegendre::new(quad_points.max(2));

    let mut e = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            e[(i, j)] = if j < n {
                integrate_with(&rule, |x| f[i].value(x) * g[j].value(x), a, b, QUAD_TOL)?
            } else {
                constants[(i, j - n)]
            };
        }
    }
    let rhs = e.determinant();

    let integrand = |xs: &[f64]| {
        let am = DMatrix::from_fn(m, m, |i, j| if j < n { f[i].value(xs[j]) } else { constants[(i, j - n)] });
        let bm = DMatrix::from_fn(n, n, |i, j| g[i].value(xs[j]));
        am.determinant() * bm.determinant()
    };
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let lhs = nested(&rule, &integrand, a, b, &[], n, &failure);
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    Ok((lhs?, rhs))
}

/// ∫_a^{upper} dx_k ∫_a^{x_k} … over the remaining levels.
fn nested(
    rule: &GaussLegendre,
    integrand: &dyn Fn(&[f64]) -> f64,
    a: f64,
    upper: f64,
    prefix: &[f64],
    levels: usize,
    failure: &RefCell<Option<Error>>,
) -> Result<f64> {
    integrate_with(
        rule,
        |x| {
            let mut p = prefix.to_vec();
            p.push(x);
            if levels == 1 {
                integrand(&p)
            } else {
                match nested(rule, integrand, a, x, &p, levels - 1, failure) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            }
        },
        a,
        upper,
        QUAD_TOL,
    )
}

/// Outcome of [`det_ratio_limit`].
#[derive(Clone, Debug, PartialEq)]
pub struct RatioLimit {
    pub value: f64,
    /// Largest relative disagreement between finite-difference derivative
    /// estimates at step h and h/2 (zero when all derivatives were exact).
    pub derivative_discrepancy: f64,
}

impl RatioLimit {
    /// Finite differences disagreed by more than 1e-6 relative.
    pub fn derivative_warning(&self) -> bool {
        self.derivative_discrepancy > 1e-6
    }
}

/// lim det C / Δ(A) as the trailing m − n eigenvalues of A collapse onto
/// `a0`, where Cᵢⱼ = fᵢ(aⱼ). Equals det E / (γ̃(m−n) κ(A₀ − a₀I, m−n)) with
/// Eᵢⱼ = fᵢ(aⱼ) for j ≤ n and fᵢ^{(m−j)}(a₀) for j > n.
pub fn det_ratio_limit(f: &[&dyn SmoothFn], a_head: &OrderedSpectrum, a0: f64, m_total: usize) -> Result<RatioLimit> {
    let m = m_total;
    let head = a_head.values();
    let n = head.len();
    if f.len() != m {
        return Err(dimension(format!("expected {m} functions, got {}", f.len())));
    }
    if n >= m {
        return Err(dimension(format!("head length {n} must be below m = {m}")));
    }
    let mut worst: f64 = 0.0;
    let mut e = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            e[(i, j)] = if j < n {
                f[i].value(head[j])
            } else {
                let order = m - j - 1;
                match f[i].derivative(order, a0) {
                    Some(d) => d,
                    None => {
                        let (d, disagreement) = fd_derivative(f[i], order, a0);
                        worst = worst.max(disagreement);
                        d
                    }
                }
            };
        }
    }
    let shifted_ln_prod: f64 = head.iter().map(|x| (x - a0).abs().ln()).sum();
    let negatives = head.iter().filter(|&&x| x < a0).count() * (m - n);
    let ln_kappa = ln_vandermonde(head) + (m - n) as f64 * shifted_ln_prod;
    let sign = if negatives.is_multiple_of(2) { 1.0 } else { -1.0 };
    let value = e.determinant() * sign * (-ln_kappa - log_gamma_product(m - n)).exp();
    Ok(RatioLimit { value, derivative_discrepancy: worst })
}

/// k-th derivative from a symmetric stencil at steps h and h/2, combined
/// by Richardson extrapolation. Returns (estimate, relative disagreement).
fn fd_derivative(f: &dyn SmoothFn, order: usize, x: f64) -> (f64, f64) {
    if order == 0 {
        return (f.value(x), 0.0);
    }
    let half_width = 2 + order / 2;
    let accuracy = 2 * ((2 * half_width + 2 - order) / 2);
    let h = 1e-2 * x.abs().max(1.0);
    let coarse = stencil(f, order, x, h, half_width);
    let fine = stencil(f, order, x, 0.5 * h, half_width);
    let factor = 2f64.powi(accuracy as i32);
    let rich = fine + (fine - coarse) / (factor - 1.0);
    let disagreement = (fine - coarse).abs() / rich.abs().max(1e-300);
    (rich, disagreement)
}

fn stencil(f: &dyn SmoothFn, order: usize, x: f64, h: f64, half_width: usize) -> f64 {
    let offsets: Vec<f64> = (0..=2 * half_width).map(|i| i as f64 - half_width as f64).collect();
    let w = fornberg_weights(&offsets, order);
    offsets.iter().zip(&w).map(|(&o, &wi)| wi * f.value(x + o * h)).sum::<f64>() / h.powi(order as i32)
}

/// Finite-difference weights for the `order`-th derivative at 0 from the
/// given (unit-spaced) nodes.
fn fornberg_weights(nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0];
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i];
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[order]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn one(_: f64) -> f64 {
        1.0
    }
    fn ident(x: f64) -> f64 {
        x
    }
    fn square(x: f64) -> f64 {
        x * x
    }
    fn cube(x: f64) -> f64 {
        x * x * x
    }

    #[test]
    fn fornberg_central_second_derivative() {
        let w = fornberg_weights(&[-1.0, 0.0, 1.0], 2);
        assert_relative_eq!(w[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(w[1], -2.0, max_relative = 1e-14);
        assert_relative_eq!(w[2], 1.0, max_relative = 1e-14);
        let (d, _) = fd_derivative(&|x: f64| x.sin(), 3, 0.7);
        assert_relative_eq!(d, -(0.7f64.cos()), max_relative = 1e-8);
    }

    #[test]
    fn andreief_trivial_and_moment_cases() {
        let empty = DMatrix::zeros(1, 0);
        let (l, r) = andreief_check(&[&one], &[&one], &empty, 0.0, 1.0, 8).unwrap();
        assert_relative_eq!(l, 1.0, max_relative = 1e-12);
        assert_relative_eq!(r, 1.0, max_relative = 1e-12);

        let empty = DMatrix::zeros(2, 0);
        let (l, r) = andreief_check(&[&one, &ident], &[&one, &ident], &empty, 0.0, 1.0, 8).unwrap();
        assert_relative_eq!(l, 1.0 / 12.0, max_relative = 1e-10);
        assert_relative_eq!(r, 1.0 / 12.0, max_relative = 1e-10);
    }

    #[test]
    fn andreief_with_constant_column() {
        let c = DMatrix::from_column_slice(3, 1, &[0.5, -1.0, 2.0]);
        let (l, r) = andreief_check(&[&one, &ident, &square], &[&ident, &cube], &c, 0.0, 1.5, 8).unwrap();
        assert!((l - r).abs() <= 1e-8 * r.abs().max(1.0), "{l} vs {r}");
    }

    #[test]
    fn ratio_limit_two_by_two() {
        // lim det[[a1, a2],[a1², a2²]]/(a1 − a2) as a2 → a0 is −a0·a1.
        let a1 = 3.0;
        let a0 = 1.2;
        let lim = det_ratio_limit(&[&ident, &square], &OrderedSpectrum::new(vec![a1]).unwrap(), a0, 2).unwrap();
        assert_relative_eq!(lim.value, -a0 * a1, max_relative = 1e-12);
        let a2 = a0 + 1e-6;
        let raw = (a1 * a2 * a2 - a2 * a1 * a1) / (a1 - a2);
        assert_relative_eq!(lim.value, raw, max_relative = 1e-5);
        assert!(!lim.derivative_warning());
    }

    #[test]
    fn ratio_limit_matches_clustered_direct_ratio() {
        // m = 3, n = 1: f = (1, x², x³ + x), a₁ = 2.5, cluster near 0.8.
        let poly = |x: f64| x * x * x + x;
        let fs: [&dyn SmoothFn; 3] = [&one, &square, &poly];
        let lim = det_ratio_limit(&fs, &OrderedSpectrum::new(vec![2.5]).unwrap(), 0.8, 3).unwrap();
        let pts = [2.5, 0.8 + 1e-4, 0.8];
        let c = DMatrix::from_fn(3, 3, |i, j| fs[i].value(pts[j]));
        let direct = c.determinant() / (ln_vandermonde(&pts)).exp();
        assert_relative_eq!(lim.value, direct, max_relative = 1e-4);
    }

    struct Exp;
    impl SmoothFn for Exp {
        fn value(&self, x: f64) -> f64 {
            x.exp()
        }
        fn derivative(&self, _order: usize, x: f64) -> Option<f64> {
            Some(x.exp())
        }
    }

    #[test]
    fn exact_derivatives_are_used() {
        let fs: [&dyn SmoothFn; 2] = [&one, &Exp];
        let lim = det_ratio_limit(&fs, &OrderedSpectrum::new(vec![2.0]).unwrap(), 0.5, 2).unwrap();
        assert_eq!(lim.derivative_discrepancy, 0.0);
        // det[[1, 1],[e², e^{0.5}]] / (2 − 0.5)
        let want = (0.5f64.exp() - 2f64.exp()) / 1.5;
        assert_relative_eq!(lim.value, want, max_relative = 1e-14);
    }
}
