//! Special functions in log form: ln Γ, ψ, ln β, ln γ̃ and the truncated
//! exponential tail Γ̃(x, n) = eˣ − Σ_{k<n} xᵏ/k!.

use std::cmp::Ordering;
use std::ops::{Div, Mul, Neg};

use statrs::function::{factorial, gamma};

use crate::error::{domain, Result};

/// A real number stored as `sign · exp(ln_abs)`.
///
/// Zero is `sign == 0` with `ln_abs == -inf`; every constructor normalizes
/// to that representation so `PartialEq` behaves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogValue {
    pub ln_abs: f64,
    pub sign: i8,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue { ln_abs: f64::NEG_INFINITY, sign: 0 };
    pub const ONE: LogValue = LogValue { ln_abs: 0.0, sign: 1 };

    pub fn new(sign: i8, ln_abs: f64) -> Self {
        if sign == 0 || ln_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue { ln_abs, sign: sign.signum() }
        }
    }

    /// Positive value with the given logarithm.
    pub fn from_ln(ln_abs: f64) -> Self {
        Self::new(1, ln_abs)
    }

    pub fn from_f64(x: f64) -> Self {
        match x.partial_cmp(&0.0) {
            Some(Ordering::Greater) => LogValue { ln_abs: x.ln(), sign: 1 },
            Some(Ordering::Less) => LogValue { ln_abs: (-x).ln(), sign: -1 },
            _ => Self::ZERO,
        }
    }

    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.ln_abs.exp()
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn is_positive(self) -> bool {
        self.sign > 0
    }

    pub fn recip(self) -> Self {
        debug_assert!(self.sign != 0, "reciprocal of zero");
        LogValue { ln_abs: -self.ln_abs, sign: self.sign }
    }

    pub fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Self::ONE;
        }
        if self.sign == 0 {
            return Self::ZERO;
        }
        let sign = if self.sign < 0 && k % 2 != 0 { -1 } else { 1 };
        LogValue { ln_abs: self.ln_abs * f64::from(k), sign }
    }

    /// Signed log-sum-exp of two values.
    pub fn add(self, other: Self) -> Self {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        let (hi, lo) = if self.ln_abs >= other.ln_abs { (self, other) } else { (other, self) };
        let r = (lo.ln_abs - hi.ln_abs).exp();
        if hi.sign == lo.sign {
            LogValue { ln_abs: hi.ln_abs + r.ln_1p(), sign: hi.sign }
        } else if r == 1.0 {
            Self::ZERO
        } else {
            LogValue { ln_abs: hi.ln_abs + (-r).ln_1p(), sign: hi.sign }
        }
    }

    pub fn sub(self, other: Self) -> Self {
        self.add(-other)
    }

    /// Sum of many signed-log terms, anchored at the largest magnitude.
    pub fn sum<I: IntoIterator<Item = LogValue>>(terms: I) -> Self {
        let terms: Vec<LogValue> = terms.into_iter().filter(|t| t.sign != 0).collect();
        let Some(max) = terms.iter().map(|t| t.ln_abs).reduce(f64::max) else {
            return Self::ZERO;
        };
        let acc: f64 = terms.iter().map(|t| f64::from(t.sign) * (t.ln_abs - max).exp()).sum();
        Self::from_f64(acc).scale_ln(max)
    }

    /// Multiply by `exp(ln_factor)`.
    pub fn scale_ln(self, ln_factor: f64) -> Self {
        if self.sign == 0 {
            self
        } else {
            LogValue { ln_abs: self.ln_abs + ln_factor, sign: self.sign }
        }
    }
}

impl Mul for LogValue {
    type Output = LogValue;
    fn mul(self, rhs: LogValue) -> LogValue {
        if self.sign == 0 || rhs.sign == 0 {
            return LogValue::ZERO;
        }
        LogValue { ln_abs: self.ln_abs + rhs.ln_abs, sign: self.sign * rhs.sign }
    }
}

impl Div for LogValue {
    type Output = LogValue;
    fn div(self, rhs: LogValue) -> LogValue {
        self * rhs.recip()
    }
}

impl Neg for LogValue {
    type Output = LogValue;
    fn neg(self) -> LogValue {
        LogValue { ln_abs: self.ln_abs, sign: -self.sign }
    }
}

fn check_positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{what} requires a finite positive argument, got {x}")))
    }
}

/// ln Γ(x) for x > 0. Integer arguments go through an exact factorial table.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive(x, "log_gamma")?;
    if x.fract() == 0.0 && x <= 171.0 {
        return Ok(factorial::ln_factorial(x as u64 - 1));
    }
    Ok(gamma::ln_gamma(x))
}

/// ψ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive(x, "digamma")?;
    Ok(digamma_unchecked(x))
}

/// ψ via upward recurrence to x ≥ 10 and the asymptotic series there.
pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Bernoulli tail: B_{2k} / (2k) for k = 1..7
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    shift + x.ln() - 0.5 / x - series
}

/// ln β(a, b).
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    Ok(log_gamma(a)? + log_gamma(b)? - log_gamma(a + b)?)
}

/// ln γ̃(n) = Σ_{i=1}^{n} ln Γ(i).
pub fn log_gamma_product(n: usize) -> f64 {
    (1..n as u64).map(factorial::ln_factorial).sum()
}

/// ln n!, exact-table backed.
pub(crate) fn ln_factorial(n: usize) -> f64 {
    factorial::ln_factorial(n as u64)
}

/// Γ̃(x, n) = eˣ − Σ_{k=0}^{n−1} xᵏ/k! as a signed-log value.
pub fn upper_exp_tail(x: f64, n: usize) -> Result<LogValue> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(domain(format!("upper_exp_tail requires finite x >= 0, got {x}")));
    }
    Ok(LogValue::from_ln(ln_upper_exp_tail(x, n)))
}

/// ln Γ̃(x, n) for x ≥ 0 (−∞ when the value is exactly zero).
pub(crate) fn ln_upper_exp_tail(x: f64, n: usize) -> f64 {
    if n == 0 {
        return x;
    }
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    x + ln_lower_reg_gamma(n, x)
}

/// ln P(n, x) = ln(e^{−x} Γ̃(x, n)), the regularized lower incomplete gamma
/// at integer order. Uses the ascending series below the mode and the
/// complement of the finite upper sum above it; either way no digits cancel.
pub(crate) fn ln_lower_reg_gamma(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    let nf = n as f64;
    let lnx = x.ln();
    if x < nf {
        // Σ_{k≥n} xᵏ/k! = xⁿ/n! · Σ_j Π_{i=1..j} x/(n+i)
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut j = 1.0;
        loop {
            term *= x / (nf + j);
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
            j += 1.0;
        }
        nf * lnx - ln_factorial(n) + sum.ln() - x
    } else {
        // Q(n,x) = e^{−x} Σ_{k<n} xᵏ/k!, summed from the largest term down.
        let mut term = ((nf - 1.0) * lnx - ln_factorial(n - 1) - x).exp();
        let mut q = term;
        let mut k = nf - 1.0;
        while k > 0.0 {
            term *= k / x;
            q += term;
            if term <= q * 1e-17 {
                break;
            }
            k -= 1.0;
        }
        (-q).ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn log_gamma_known_points() {
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        assert_eq!(log_gamma(2.0).unwrap(), 0.0);
        assert_relative_eq!(log_gamma(5.0).unwrap(), 24f64.ln(), max_relative = 1e-14);
        // ln Γ(0.5) = ln √π
        assert_relative_eq!(log_gamma(0.5).unwrap(), 0.5 * std::f64::consts::PI.ln(), max_relative = 1e-13);
        // mpmath: loggamma(7.3)
        assert_relative_eq!(log_gamma(7.3).unwrap(), 7.1478925230222487, max_relative = 1e-13);
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
    }

    #[test]
    fn digamma_known_points() {
        assert!((digamma(1.0).unwrap() + EULER_GAMMA).abs() < 1e-14);
        assert!((digamma(2.0).unwrap() - (1.0 - EULER_GAMMA)).abs() < 1e-14);
        // mpmath: digamma(10), digamma(0.25)
        assert!((digamma(10.0).unwrap() - 2.2517525890667211).abs() < 1e-14);
        assert!((digamma(0.25).unwrap() + 4.2274535333762654).abs() < 1e-13);
        assert!(digamma(0.0).is_err());
    }

    #[test]
    fn log_beta_known_points() {
        assert_eq!(log_beta(1.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(log_beta(2.0, 1.0).unwrap(), 0.5f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(log_beta(3.0, 4.0).unwrap(), (1.0f64 / 60.0).ln(), max_relative = 1e-14);
        assert!(log_beta(0.0, 1.0).is_err());
    }

    #[test]
    fn log_beta_matches_quadrature() {
        for &a in &[1.0, 2.0, 5.0] {
            for &b in &[1.0, 2.0, 5.0] {
                let integral = crate::detkit::quad::integrate(
                    |t: f64| t.powf(a - 1.0) * (1.0 - t).powf(b - 1.0),
                    0.0,
                    1.0,
                    1e-12,
                )
                .unwrap();
                assert_relative_eq!(log_beta(a, b).unwrap().exp(), integral, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn gamma_product_small() {
        assert_eq!(log_gamma_product(0), 0.0);
        assert_eq!(log_gamma_product(1), 0.0);
        assert_relative_eq!(log_gamma_product(3), 2f64.ln(), max_relative = 1e-15);
        for n in 1..100 {
            let step = log_gamma_product(n + 1) - log_gamma_product(n);
            assert_relative_eq!(step, log_gamma((n + 1) as f64).unwrap(), max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn exp_tail_examples() {
        assert_relative_eq!(upper_exp_tail(5.0, 0).unwrap().to_f64(), 5f64.exp(), max_relative = 1e-15);
        assert!(upper_exp_tail(0.0, 3).unwrap().is_zero());
        assert_relative_eq!(
            upper_exp_tail(1.0, 2).unwrap().to_f64(),
            std::f64::consts::E - 2.0,
            max_relative = 1e-14
        );
        assert!(upper_exp_tail(-1.0, 2).is_err());
    }

    #[test]
    fn exp_tail_against_high_precision() {
        // mpmath at 50 digits: log(e^x − Σ_{k<n} x^k/k!)
        let cases = [
            (0.1, 5, -16.283_650_781_624_364),
            (3.0, 10, -3.810_185_717_036_396_2),
            (50.0, 20, 49.999_999_520_864_155),
            (200.0, 200, 199.325_484_993_409_65),
            (700.0, 150, 700.0),
            (1e-8, 12, -241.035_383_422_321_04),
        ];
        for (x, n, want) in cases {
            let got = upper_exp_tail(x, n).unwrap().ln_abs;
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn exp_tail_telescopes() {
        for &x in &[0.1, 1.0, 10.0, 100.0] {
            for n in 0..50usize {
                let lhs = upper_exp_tail(x, n).unwrap();
                let step = LogValue::from_ln(n as f64 * f64::ln(x) - ln_factorial(n));
                let rhs = upper_exp_tail(x, n + 1).unwrap().add(step);
                assert_relative_eq!(lhs.ln_abs, rhs.ln_abs, max_relative = 1e-9, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn logvalue_arithmetic() {
        let a = LogValue::from_f64(3.0);
        let b = LogValue::from_f64(-5.0);
        assert_relative_eq!((a * b).to_f64(), -15.0, max_relative = 1e-15);
        assert_relative_eq!((a / b).to_f64(), -0.6, max_relative = 1e-15);
        assert_relative_eq!(a.add(b).to_f64(), -2.0, max_relative = 1e-15);
        assert_relative_eq!(a.sub(b).to_f64(), 8.0, max_relative = 1e-15);
        assert!(a.sub(a).is_zero());
        assert_relative_eq!(b.powi(3).to_f64(), -125.0, max_relative = 1e-14);
        let s = LogValue::sum([a, b, LogValue::ZERO, LogValue::from_f64(1.5)]);
        assert_relative_eq!(s.to_f64(), -0.5, max_relative = 1e-14);
        // huge magnitudes survive
        let big = LogValue::from_ln(5000.0);
        assert_relative_eq!((big / big.scale_ln(-2.0)).ln_abs, 2.0, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn exp_tail_positive(x in 1e-6f64..500.0, n in 0usize..120) {
            let v = upper_exp_tail(x, n).unwrap();
            prop_assert!(v.is_positive());
            prop_assert!(v.ln_abs <= x + 1e-12);
        }

        #[test]
        fn signed_sum_matches_plain(xs in proptest::collection::vec(-1e3f64..1e3, 1..12)) {
            let plain: f64 = xs.iter().sum();
            let logs = LogValue::sum(xs.iter().map(|&x| LogValue::from_f64(x)));
            let scale: f64 = xs.iter().map(|x| x.abs()).sum();
            prop_assert!((logs.to_f64() - plain).abs() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn digamma_recurrence(x in 0.05f64..80.0) {
            let lhs = digamma(x + 1.0).unwrap();
            let rhs = digamma(x).unwrap() + 1.0 / x;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }
}
