//! Signed-log arithmetic and the special functions behind the closed forms.
//!
//! cargo run --release --example special_functions

use macbounds::specfn::{digamma, log_beta, log_gamma, log_gamma_product, upper_exp_tail, LogValue};

fn main() -> macbounds::Result<()> {
    println!("ln Γ(0.5)  = {:.15}  (ln √π = {:.15})", log_gamma(0.5)?, std::f64::consts::PI.sqrt().ln());
    println!("ψ(1)       = {:.15}  (−Euler γ)", digamma(1.0)?);
    println!("ln B(2, 5) = {:.15}  (ln 1/30 = {:.15})", log_beta(2.0, 5.0)?, (1.0f64 / 30.0).ln());
    println!("γ̃(10)      = {:.6e}  (Γ(1)·Γ(2)·…·Γ(10))", log_gamma_product(10).exp());
    println!("ln γ̃(60)   = {:.6}  (overflows f64 as a plain product)", log_gamma_product(60));

    // eˣ minus its first n Taylor terms: at x = 2, n = 30 the naive
    // subtraction returns 0 or noise; the tail series keeps every digit.
    for (x, n) in [(5.0, 3), (2.0, 30), (400.0, 10)] {
        let tail = upper_exp_tail(x, n)?;
        let naive: f64 = f64::exp(x) - (0..n).map(|k| x.powi(k as i32) / (1..=k).map(|j| j as f64).product::<f64>()).sum::<f64>();
        println!("Γ̃({x}, {n}): ln = {:.12}, naive subtraction = {naive:.6e}", tail.ln_abs);
    }

    // Signed logs add and subtract without overflow.
    let big = LogValue::from_ln(800.0);
    let diff = big.sub(LogValue::from_ln(800.0 - 1e-3));
    println!("e^800 − e^(800−0.001) = exp({:.9}) with sign {}", diff.ln_abs, diff.sign);
    Ok(())
}
