//! The determinant machinery checked against its own oracles: the
//! closed-form E[ln det(XLX†)] versus the divided-difference engine, the
//! Hₖ/Rₖ identity, the generalized Andreief identity and a confluent limit.
//!
//! cargo run --release --example determinant_identities

use macbounds::detkit::{
    andreief_check, build_hk, build_rk, det_ratio_limit, exp_logdet_gauss_quadratic, exp_logdet_quadratic_form,
    perturbed_exp_logdet, OrderedSpectrum,
};
use macbounds::specfn::log_gamma_product;
use nalgebra::DMatrix;

fn main() -> macbounds::Result<()> {
    let (l0, m) = (vec![7.5, 3.0], 5);
    let spec = OrderedSpectrum::new(l0.clone())?;
    let closed = exp_logdet_gauss_quadratic(&spec, m)?;
    let mut full = l0.clone();
    full.resize(m, 1.0);
    let stable = exp_logdet_quadratic_form(&full, l0.len())?;
    println!("E ln det(XLX†), L = {full:?}: closed form {closed:.12}, stable engine {stable:.12}");

    let scale = (log_gamma_product(2) + log_gamma_product(m - 2)).exp();
    for k in 1..=2 {
        let h = build_hk(&spec, m, k)?.determinant();
        let r = build_rk(&spec, k, m)?.determinant();
        println!("k={k}: det H = {h:.10e}, γ̃(n)γ̃(m−n) det R = {:.10e}", scale * r);
    }

    // Repeated eigenvalues: the closed form is singular, the perturbed and
    // stable evaluations are not.
    let p = perturbed_exp_logdet(&[4.0, 4.0], m)?;
    let exact = exp_logdet_quadratic_form(&[4.0, 4.0, 1.0, 1.0, 1.0], 2)?;
    println!("repeated spectrum: extrapolated {:.10} (± {:.1e}), exact {exact:.10}", p.value, p.error_estimate);

    let one = |_: f64| 1.0;
    let x = |x: f64| x;
    let x2 = |x: f64| x * x;
    let c = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, -2.0]);
    let (lhs, rhs) = andreief_check(&[&one, &x, &x2], &[&one, &x], &c, 0.0, 2.0, 12)?;
    println!("Andreief (n=2, m=3): iterated integral {lhs:.12}, det E {rhs:.12}");

    // det[fᵢ(aⱼ)]/Δ(a) as two of three points merge at 0.5.
    let lim = det_ratio_limit(&[&one, &x, &|x: f64| x.exp()], &OrderedSpectrum::new(vec![2.0])?, 0.5, 3)?;
    let a: [f64; 3] = [2.0, 0.5 + 1e-4, 0.5];
    let direct = DMatrix::from_fn(3, 3, |i, j| [1.0, a[j], a[j].exp()][i]).determinant()
        / ((a[0] - a[1]) * (a[0] - a[2]) * (a[1] - a[2]));
    println!("confluent limit {:.8}, nearly merged direct ratio {direct:.8}", lim.value);
    Ok(())
}
