//! The two-user closed-form lower bound against the general one, which
//! reaches the same quantity by a different integration route.
//!
//! cargo run --release --example two_user [tau] [outer] [inner]

use macbounds::capacity_lb::{two_user_lb, ustm_lb, LbSampleBudget};
use macbounds::config::ChannelConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|s| s.parse()).collect::<Result<_, _>>()?;
    let tau = args.first().copied().unwrap_or(4);
    let budget = LbSampleBudget {
        outer_samples: args.get(1).copied().unwrap_or(4000),
        inner_samples: args.get(2).copied().unwrap_or(300),
        ..LbSampleBudget::default()
    };
    let cfg = ChannelConfig::single_antenna(2, 2, tau)?;
    println!("snr_db   two_user            general             |Δ|/σ");
    for snr_db in [0.0, 5.0, 10.0, 20.0, 30.0] {
        let rho = 10f64.powf(snr_db / 10.0);
        let a = two_user_lb(&cfg, rho, &budget)?;
        let b = ustm_lb(&cfg, rho, &budget)?;
        let z = (a.value - b.value).abs() / a.std_error.hypot(b.std_error);
        println!("{snr_db:>6}   {:.4} ± {:.4}   {:.4} ± {:.4}   {z:.2}", a.value, a.std_error, b.value, b.std_error);
    }
    Ok(())
}
