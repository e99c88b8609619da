//! Adaptive Gauss–Legendre quadrature.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Nodes and weights of an n-point Gauss–Legendre rule on [−1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on Pₙ from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Fixed rule on [a, b].
    pub fn apply<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(mid + half * x)).sum::<f64>() * half
    }
}

/// Pₙ(x) and P′ₙ(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const MAX_PANELS: usize = 200_000;

/// Adaptive integration with a 10-point base rule.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    integrate_with(&GaussLegendre::new(10), f, a, b, rel_tol)
}

struct Panel {
    err: f64,
    abs: f64,
    lo: f64,
    hi: f64,
    value: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive bisection: each panel's error is the gap between the
/// rule on the panel and the sum over its halves; the worst panel is split
/// until the summed error is below `rel_tol` times the integral of |f|.
pub fn integrate_with<F: Fn(f64) -> f64>(rule: &GaussLegendre, f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("infinite interval [{a}, {b}]")));
    }
    let abs_f = |x: f64| f(x).abs();
    let evaluate = |lo: f64, hi: f64| {
        let mid = 0.5 * (lo + hi);
        let coarse = rule.apply(&f, lo, hi);
        let fine = rule.apply(&f, lo, mid) + rule.apply(&f, mid, hi);
        Panel { err: (fine - coarse).abs(), abs: rule.apply(&abs_f, lo, hi), lo, hi, value: fine }
    };
    let width = b - a;
    let mut heap = BinaryHeap::new();
    for k in 0..4 {
        let lo = a + width * k as f64 / 4.0;
        let hi = if k == 3 { b } else { a + width * (k + 1) as f64 / 4.0 };
        heap.push(evaluate(lo, hi));
    }
    let mut panels = heap.len();
    loop {
        let total_err: f64 = heap.iter().map(|p| p.err).sum();
        let value: f64 = heap.iter().map(|p| p.value).sum();
        if !(total_err.is_finite() && value.is_finite()) {
            return Err(Error::Quadrature(format!("integrand not finite on [{a}, {b}]")));
        }
        let scale: f64 = heap.iter().map(|p| p.abs).sum();
        if total_err <= rel_tol * scale || total_err == 0.0 {
            return Ok(value);
        }
        if panels > MAX_PANELS {
            return Err(Error::Quadrature(format!("more than {MAX_PANELS} panels on [{a}, {b}]")));
        }
        // Split several of the worst panels per round to keep rescans cheap.
        let rounds = (heap.len() / 8).max(1);
        for _ in 0..rounds {
            let worst = heap.pop().expect("nonempty");
            let mid = 0.5 * (worst.lo + worst.hi);
            if !(mid > worst.lo && mid < worst.hi) {
                return Err(Error::Quadrature(format!("panel error stalled near {mid}")));
            }
            heap.push(evaluate(worst.lo, mid));
            heap.push(evaluate(mid, worst.hi));
            panels += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rule_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(5);
        // degree 9 integrates exactly
        let v = rule.apply(&|x: f64| x.powi(9) + x.powi(8), -1.0, 1.0);
        assert_relative_eq!(v, 2.0 / 9.0, max_relative = 1e-14);
        let w: f64 = GaussLegendre::new(17).weights.iter().sum();
        assert_relative_eq!(w, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn adaptive_handles_peaks_and_endpoint_singularities() {
        let v = integrate(|x: f64| 1.0 / (1e-4 + (x - 0.3).powi(2)), 0.0, 1.0, 1e-12).unwrap();
        let want = 100.0 * ((0.7f64 / 1e-2).atan() + (0.3f64 / 1e-2).atan());
        assert_relative_eq!(v, want, max_relative = 1e-10);
        let v = integrate(|x: f64| x.sqrt().ln(), 0.0, 1.0, 1e-10).unwrap();
        assert_relative_eq!(v, -0.5, max_relative = 1e-8);
    }

    #[test]
    fn non_finite_integrand_errors() {
        assert!(integrate(|x: f64| 1.0 / x, 0.0, 1.0, 1e-10).is_err());
    }
}
