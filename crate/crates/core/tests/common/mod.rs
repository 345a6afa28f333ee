//! Randomized small-instance generation shared by the property and
//! acceptance suites. Instances are fully determined by a seed so failures
//! replay exactly; states rebuild from the raw channel list so tests can
//! re-run variants with mutated capacities.

// not every test target uses every helper
#![allow(dead_code)]

use pcnsim_core::amount::{Amount, FeeRate};
use pcnsim_core::fees::FeePolicy;
use pcnsim_core::ledger::{NetworkState, NodeId, Transaction};
use pcnsim_core::workload::{self, WorkloadConfig};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Raw channel spec: (a, b, cap_ab ticks, cap_ba ticks).
pub type ChannelSpec = (u32, u32, u64, u64);

pub struct Instance {
    pub n_nodes: u32,
    pub channels: Vec<ChannelSpec>,
    pub tx: Transaction,
    pub policy: FeePolicy,
}

impl Instance {
    pub fn state(&self) -> NetworkState {
        build_state(self.n_nodes, &self.channels)
    }

    /// Same instance with one directed capacity overridden.
    pub fn state_with_capacity(&self, from: NodeId, to: NodeId, cap: Amount) -> NetworkState {
        let mut channels = self.channels.clone();
        for spec in &mut channels {
            if (spec.0, spec.1) == (from.0, to.0) {
                spec.2 = cap.ticks();
            } else if (spec.0, spec.1) == (to.0, from.0) {
                spec.3 = cap.ticks();
            }
        }
        build_state(self.n_nodes, &channels)
    }
}

pub fn build_state(n_nodes: u32, channels: &[ChannelSpec]) -> NetworkState {
    let mut state = NetworkState::new(n_nodes, Amount::from_units(1_000_000), Amount::ZERO);
    for &(a, b, cap_ab, cap_ba) in channels {
        state
            .open_channel(
                NodeId(a),
                NodeId(b),
                Amount::from_ticks(cap_ab),
                Amount::from_ticks(cap_ba),
            )
            .expect("funded test node");
    }
    state
}

/// Random instance: 3..=9 nodes, scale-free or uniform random topology,
/// per-direction capacities up to 2000 units, amounts in [0.01, 500] units,
/// alternating proportional and imbalance-adjusted fee policies.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_nodes: u32 = rng.random_range(3..=9);

    let max_cap: u64 = 20_000_000; // 2000 units in ticks
    let mut channels: Vec<ChannelSpec> = Vec::new();
    if rng.random_range(0..2) == 0 {
        let ba_m = rng.random_range(1..=(n_nodes - 1).min(3));
        let cfg = WorkloadConfig {
            n_nodes,
            ba_m,
            ..WorkloadConfig::default()
        };
        for (a, b) in workload::generate_topology(&cfg, &mut rng) {
            channels.push((
                a.0,
                b.0,
                rng.random_range(0..=max_cap),
                rng.random_range(0..=max_cap),
            ));
        }
    } else {
        // Erdős–Rényi-style: each pair independently, possibly disconnected
        for a in 0..n_nodes {
            for b in (a + 1)..n_nodes {
                if rng.random_range(0..2) == 0 {
                    channels.push((
                        a,
                        b,
                        rng.random_range(0..=max_cap),
                        rng.random_range(0..=max_cap),
                    ));
                }
            }
        }
    }

    let sender = rng.random_range(0..n_nodes);
    let receiver = loop {
        let r = rng.random_range(0..n_nodes);
        if r != sender {
            break r;
        }
    };
    let amount = Amount::from_ticks(rng.random_range(100..=5_000_000));
    let rate = FeeRate::default();
    let policy = if rng.random_range(0..2) == 0 {
        FeePolicy::proportional(rate)
    } else {
        FeePolicy::proportional_imbalance(rate)
    };

    Instance {
        n_nodes,
        channels,
        tx: Transaction::new(NodeId(sender), NodeId(receiver), amount),
        policy,
    }
}
