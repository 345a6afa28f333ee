//! Shared fixtures for the routing benchmarks.

use pcnsim_core::ledger::NetworkState;
use pcnsim_core::sim::{bootstrap, SimConfig};
use pcnsim_core::workload::Workload;

/// A freshly bootstrapped default-configuration network (1000 nodes, m = 2,
/// 1000/1000 channel funding) and its generated workload.
pub fn full_scale_network(seed: u64) -> (SimConfig, NetworkState, Workload) {
    let cfg = SimConfig {
        seed,
        ..SimConfig::default()
    };
    let workload = Workload::generate(&cfg.workload()).expect("valid default config");
    let state = bootstrap(&cfg, &workload.edges).expect("funded bootstrap");
    (cfg, state, workload)
}
