//! Lower bounds when users have several antennas: each user's USTM input
//! has repeated singular values, handled by symmetric separation and
//! Richardson extrapolation.
//!
//! cargo run --release --example multi_antenna

use macbounds::capacity_lb::{ustm_lb, LbSampleBudget};
use macbounds::capacity_ub::{saddle_solve, SaddleConfig, SaddleMode};
use macbounds::config::ChannelConfig;

fn main() -> macbounds::Result<()> {
    let budget = LbSampleBudget { outer_samples: 2000, inner_samples: 200, ..LbSampleBudget::default() };
    let rho = 10.0;
    for antennas in [vec![1, 1, 1, 1], vec![2, 2], vec![1, 3], vec![4]] {
        let cfg = ChannelConfig::new(10, antennas, 4)?;
        let lb = ustm_lb(&cfg, rho, &budget)?;
        let ub = saddle_solve(&cfg, rho, SaddleMode::Square, &SaddleConfig::default(), None)?;
        let delta = lb.meta.get("perturbation_delta").and_then(|v| v.as_f64()).unwrap_or(0.0);
        println!(
            "users {:<12} lb_ustm {:.4} ± {:.4} (extrapolation Δ {delta:.1e})   ub_square {:.4}",
            format!("{:?}", cfg.per_user_antennas),
            lb.value,
            lb.std_error,
            ub.value
        );
    }
    Ok(())
}
