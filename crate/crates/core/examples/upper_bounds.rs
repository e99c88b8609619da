//! Square-case and perfect-CSI upper bounds across an SNR sweep.
//!
//! cargo run --release --example upper_bounds -- [users] [tau]

use macbounds::capacity_ub::{perfect_csi_ub, saddle_solve, SaddleConfig, SaddleMode};
use macbounds::config::{ChannelConfig, McConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let users: usize = args.next().map_or(Ok(4), |s| s.parse())?;
    let tau: usize = args.next().map_or(Ok(10), |s| s.parse())?;
    let cfg = ChannelConfig::single_antenna(users, users, tau)?;
    let scfg = SaddleConfig::default();
    println!("snr_db  ub_square  ub_csi   lambda      d");
    for db in [0.0, 10.0, 20.0, 30.0, 40.0] {
        let rho = 10f64.powf(db / 10.0);
        let ub = saddle_solve(&cfg, rho, SaddleMode::Square, &scfg, None)?;
        let csi = perfect_csi_ub(&cfg, rho, &McConfig::new(100_000, 1))?;
        println!(
            "{db:>6}  {:>9.4}  {:>7.4}  {:.4e}  {}  ({:.2}s)",
            ub.value, csi.value, ub.meta["lambda"].as_f64().unwrap_or(f64::NAN), ub.meta["d"], ub.runtime_seconds
        );
    }
    Ok(())
}
