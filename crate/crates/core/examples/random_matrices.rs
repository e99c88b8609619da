//! Indexed random streams, structured inputs and cached Monte-Carlo constants.
//!
//! cargo run --release --example random_matrices [cache.json]

use macbounds::config::{ChannelConfig, McConfig};
use macbounds::randmat::{
    estimate_order_constant, estimate_zeta, sample_mac_ustm_input, sample_stiefel, ConstantCache, RngStream,
};

fn main() -> macbounds::Result<()> {
    // Sample i of an estimate always uses stream (base ^ i): reproducible
    // regardless of how work is split across threads.
    let q = sample_stiefel(2, 5, RngStream::new(7, 0))?;
    let gram = &q * q.adjoint();
    println!("Stiefel 2×5: ‖QQ† − I‖ = {:.2e}", (gram - nalgebra::DMatrix::identity(2, 2)).norm());

    let cfg = ChannelConfig::new(6, vec![1, 2], 4)?;
    let x = sample_mac_ustm_input(&cfg, 10.0, RngStream::new(7, 1))?;
    println!("USTM input for users {:?}: {}×{}, ‖X‖²_F = {:.6} (τρ = 60)", cfg.per_user_antennas, x.nrows(), x.ncols(), x.norm_squared());

    let cache = match std::env::args().nth(1) {
        Some(path) => ConstantCache::open(path)?,
        None => ConstantCache::in_memory(),
    };
    let mc = McConfig::new(200_000, 0x5EED);
    let zeta = estimate_zeta(4, 2, &mc, Some(&cache))?;
    let oconst = estimate_order_constant(&cfg, 10.0, &mc, Some(&cache))?;
    println!("ζ(4, 2) = {:.5} ± {:.5}", zeta.mean, zeta.std_error);
    println!("order constant = {:.5} ± {:.5}", oconst.mean, oconst.std_error);
    for (key, c) in cache.entries() {
        println!("  cached {key}: {:.6} ({} samples)", c.mean, c.n_samples);
    }
    Ok(())
}
