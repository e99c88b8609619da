use nalgebra::DMatrix;

use super::SignedLogDet;
use crate::specfn::LogValue;

/// Determinant in signed-log form plus an estimate of how many decimal
/// digits the elimination cancelled away.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogDet {
    pub value: SignedLogDet,
    pub digits_lost: f64,
}

impl LogDet {
    /// More than eight digits lost.
    pub fn ill_conditioned(&self) -> bool {
        self.digits_lost > 8.0
    }
}

/// Determinant of a matrix whose entries are signed logs.
///
/// Rows and then columns are scaled so every entry has magnitude ≤ 1 with a
/// unit entry in each row and column; elimination with partial pivoting
/// then runs in ordinary floating point and the scales are added back in
/// log space. A singular matrix yields sign 0.
pub fn signed_logdet(entries: &DMatrix<LogValue>) -> LogDet {
    assert_eq!(entries.nrows(), entries.ncols(), "determinant of a non-square matrix");
    let dim = entries.nrows();
    let mut ln = Vec::with_capacity(dim * dim);
    let mut sign = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let e = entries[(i, j)];
            ln.push(e.ln_abs);
            sign.push(e.sign);
        }
    }
    let mut scratch = Scratch::default();
    logdet_row_major(&ln, &sign, dim, &mut scratch)
}

/// Same as [`signed_logdet`] for ordinary real entries.
pub fn signed_logdet_real(m: &DMatrix<f64>) -> LogDet {
    signed_logdet(&m.map(LogValue::from_f64))
}

#[derive(Default)]
pub(crate) struct Scratch {
    a: Vec<f64>,
    col: Vec<f64>,
}

/// Core elimination over row-major `ln|entry|` / sign arrays.
pub(crate) fn logdet_row_major(ln: &[f64], sign: &[i8], dim: usize, s: &mut Scratch) -> LogDet {
    if dim == 0 {
        return LogDet { value: LogValue::ONE, digits_lost: 0.0 };
    }
    let singular = LogDet { value: LogValue::ZERO, digits_lost: f64::INFINITY };
    let mut scale = 0.0;
    s.col.clear();
    s.col.resize(dim, f64::NEG_INFINITY);
    s.a.clear();
    s.a.resize(dim * dim, 0.0);
    // Row scales, folded directly into the working copy.
    for i in 0..dim {
        let row = &ln[i * dim..(i + 1) * dim];
        let mut rmax = f64::NEG_INFINITY;
        for (j, &v) in row.iter().enumerate() {
            if sign[i * dim + j] != 0 && v > rmax {
                rmax = v;
            }
        }
        if rmax == f64::NEG_INFINITY {
            return singular;
        }
        scale += rmax;
        for j in 0..dim {
            let v = if sign[i * dim + j] == 0 { f64::NEG_INFINITY } else { row[j] - rmax };
            s.a[i * dim + j] = v;
            if v > s.col[j] {
                s.col[j] = v;
            }
        }
    }
    for j in 0..dim {
        if s.col[j] == f64::NEG_INFINITY {
            return singular;
        }
        scale += s.col[j];
    }
    for i in 0..dim {
        for j in 0..dim {
            let k = i * dim + j;
            s.a[k] = if sign[k] == 0 { 0.0 } else { f64::from(sign[k]) * (s.a[k] - s.col[j]).exp() };
        }
    }
    let a = &mut s.a;
    let mut det_sign: i8 = 1;
    let mut min_pivot = f64::INFINITY;
    for k in 0..dim {
        let mut piv = k;
        let mut best = a[k * dim + k].abs();
        for i in k + 1..dim {
            let v = a[i * dim + k].abs();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            return singular;
        }
        if piv != k {
            for j in 0..dim {
                a.swap(k * dim + j, piv * dim + j);
            }
            det_sign = -det_sign;
        }
        let p = a[k * dim + k];
        if p < 0.0 {
            det_sign = -det_sign;
        }
        scale += p.abs().ln();
        min_pivot = min_pivot.min(p.abs());
        for i in k + 1..dim {
            let f = a[i * dim + k] / p;
            if f != 0.0 {
                for j in k + 1..dim {
                    a[i * dim + j] -= f * a[k * dim + j];
                }
            }
        }
    }
    LogDet { value: LogValue::new(det_sign, scale), digits_lost: (-min_pivot.log10()).max(0.0) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cofactor_det(m: &DMatrix<f64>) -> f64 {
        let n = m.nrows();
        if n == 1 {
            return m[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let minor = m.clone().remove_row(0).remove_column(j);
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                s * m[(0, j)] * cofactor_det(&minor)
            })
            .sum()
    }

    #[test]
    fn small_examples() {
        assert_eq!(signed_logdet_real(&DMatrix::identity(3, 3)).value, LogValue::ONE);
        let d = signed_logdet_real(&DMatrix::from_diagonal(&nalgebra::dvector![2.0, 3.0]));
        assert_relative_eq!(d.value.to_f64(), 6.0, max_relative = 1e-15);
        let sing = signed_logdet_real(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
        assert!(sing.value.is_zero());
        let neg = signed_logdet_real(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(neg.value.to_f64(), -1.0);
    }

    #[test]
    fn random_matrices_match_cofactor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in 1..=5 {
            for _ in 0..20 {
                let m = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
                let want = cofactor_det(&m);
                let got = signed_logdet_real(&m).value.to_f64();
                assert_relative_eq!(got, want, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn huge_dynamic_range() {
        // diag(e^900, e^-900, 5) would overflow/underflow in plain arithmetic.
        let mut m = DMatrix::from_element(3, 3, LogValue::ZERO);
        m[(0, 0)] = LogValue::from_ln(900.0);
        m[(1, 1)] = LogValue::from_ln(-900.0);
        m[(2, 2)] = LogValue::from_f64(5.0);
        m[(0, 2)] = LogValue::from_ln(950.0);
        let d = signed_logdet(&m);
        assert_eq!(d.value.sign, 1);
        assert_relative_eq!(d.value.ln_abs, 5f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn flags_near_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-10]);
        let d = signed_logdet_real(&m);
        assert!(d.ill_conditioned());
        assert!(!signed_logdet_real(&DMatrix::identity(4, 4)).ill_conditioned());
    }
}
