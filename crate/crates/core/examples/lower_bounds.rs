//! USTM and Gaussian-input lower bounds at one operating point.
//!
//! cargo run --release --example lower_bounds -- [users] [rx] [tau] [snr_db] [outer] [inner]

use macbounds::capacity_lb::{gaussian_lb, ustm_lb, LbSampleBudget};
use macbounds::config::ChannelConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let num = |i: usize, default: f64| args.get(i).map_or(Ok(default), |s| s.parse::<f64>());
    let (users, rx, tau) = (num(0, 4.0)? as usize, num(1, 4.0)? as usize, num(2, 10.0)? as usize);
    let snr_db = num(3, 10.0)?;
    let budget = LbSampleBudget {
        outer_samples: num(4, 2000.0)? as usize,
        inner_samples: num(5, 200.0)? as usize,
        ..LbSampleBudget::default()
    };
    let cfg = ChannelConfig::single_antenna(users, rx, tau)?;
    let rho = 10f64.powf(snr_db / 10.0);
    for b in [ustm_lb(&cfg, rho, &budget)?, gaussian_lb(&cfg, rho, &budget)?] {
        println!("{:<9} {:.5} ± {:.5} nats/use  ({:.1}s)", b.kind.as_str(), b.value, b.std_error, b.runtime_seconds);
    }
    Ok(())
}
