//! Fixtures shared by the benchmarks.

use ehlora::harness::{run_allocation, ScenarioConfig};
use ehlora::optimizer::UplinkSystem;
use ehlora::phy::{noise_power, time_on_air};
use ehlora::CollisionMode;

/// Active users of one default-scenario cell at `density`, ready for the
/// EH-time and power stages.
pub fn uplink_fixture(seed: u64, density: f64, col_mode: CollisionMode) -> UplinkSystem {
    let cfg = ScenarioConfig::default();
    let alloc = run_allocation(&cfg, seed, density).expect("default scenario allocates");
    let ids = &alloc.assignment.active_ids;
    let sfs: Vec<_> = ids.iter().map(|&i| alloc.assignment.sf_of[&i]).collect();
    UplinkSystem {
        gains: ids.iter().map(|&i| alloc.topology.users[i].gain).collect(),
        toa_s: sfs.iter().map(|&s| time_on_air(s, &cfg.phy)).collect(),
        harvest_w: ids.iter().map(|&i| alloc.harvest_w[i]).collect(),
        sfs,
        p_t_w: cfg.p_t_w(),
        noise_w: noise_power(&cfg.phy),
        off_ratio: cfg.phy.off_ratio(),
        correlation: cfg.corr_policy.clone(),
        col_mode,
    }
}
