//! End-to-end experiment driver: bootstrap the channel network, settle the
//! payment stream one transaction at a time, aggregate the report.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::Amount;
use crate::fees::FeePolicy;
use crate::ledger::{LedgerError, NetworkState, NodeId};
use crate::report::{Outcome, SimReport, TxRecord};
use crate::router::{self, CapacityCheck, SettlementDecision};
use crate::workload::{Workload, WorkloadConfig, WorkloadError};

/// Transactions between two consecutive conservation audits.
const AUDIT_INTERVAL: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_nodes: u32,
    pub n_transactions: u32,
    pub ba_m: u32,
    pub channel_funding_per_side: Amount,
    pub initial_balance: Amount,
    pub chain_fee: Amount,
    pub fee_policy: FeePolicy,
    pub capacity_check: CapacityCheck,
    pub lognormal_mu: f64,
    pub lognormal_sigma: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    /// 1000 nodes attached with m = 2, 100 000 transactions, one million
    /// units of starting balance, channels funded 1000/1000, a 0.41 on-chain
    /// fee and a 0.5 % imbalance-adjusted routing fee.
    fn default() -> Self {
        SimConfig {
            n_nodes: 1000,
            n_transactions: 100_000,
            ba_m: 2,
            channel_funding_per_side: Amount::from_units(1000),
            initial_balance: Amount::from_units(1_000_000),
            chain_fee: Amount::from_ticks(4_100),
            fee_policy: FeePolicy::proportional_imbalance(Default::default()),
            capacity_check: CapacityCheck::Tight,
            lognormal_mu: 2.95,
            lognormal_sigma: 1.2,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn workload(&self) -> WorkloadConfig {
        WorkloadConfig {
            n_nodes: self.n_nodes,
            ba_m: self.ba_m,
            n_transactions: self.n_transactions,
            lognormal_mu: self.lognormal_mu,
            lognormal_sigma: self.lognormal_sigma,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.workload().validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("workload does not fit the configured network: {0}")]
    WorkloadMismatch(String),
    #[error("conservation violated after {after_transactions} transactions")]
    ConservationViolated { after_transactions: u32 },
}

/// Funds every node and opens one channel per topology edge, both sides
/// funded equally; the joining endpoint initiates and pays the on-chain fee.
pub fn bootstrap(cfg: &SimConfig, edges: &[(NodeId, NodeId)]) -> Result<NetworkState, SimError> {
    let mut state = NetworkState::new(cfg.n_nodes, cfg.initial_balance, cfg.chain_fee);
    for &(a, b) in edges {
        state.open_channel(
            a,
            b,
            cfg.channel_funding_per_side,
            cfg.channel_funding_per_side,
        )?;
    }
    Ok(state)
}

/// Generates the workload from the config's seed and runs the experiment.
pub fn run(cfg: &SimConfig) -> Result<SimReport, SimError> {
    let workload = Workload::generate(&cfg.workload())?;
    run_with_workload(cfg, &workload).map(|(report, _)| report)
}

/// Runs the experiment against an externally supplied (or replayed)
/// workload. Returns the report and the final network state.
///
/// Per transaction: quote the cheapest route against the current state,
/// decide between off-chain settlement and the on-chain fallback, apply.
/// Conservation is audited every 1000 transactions and at the end.
pub fn run_with_workload(
    cfg: &SimConfig,
    workload: &Workload,
) -> Result<(SimReport, NetworkState), SimError> {
    cfg.validate()?;
    if let Some(max) = workload.max_node_id()
        && max.0 >= cfg.n_nodes
    {
        return Err(SimError::WorkloadMismatch(format!(
            "node {max} referenced, but the network has {} nodes",
            cfg.n_nodes
        )));
    }

    let mut state = bootstrap(cfg, &workload.edges)?;
    let chain_fees_bootstrap = state.burned();

    let mut records = Vec::with_capacity(workload.transactions.len());
    for (i, tx) in workload.transactions.iter().enumerate() {
        let quote = router::cheapest_path(&state, &cfg.fee_policy, cfg.capacity_check, tx);
        let can_fund_onchain = tx
            .amount
            .checked_add(cfg.chain_fee)
            .is_some_and(|required| state.balance(tx.sender) >= required);
        let decision = router::decide(quote, cfg.chain_fee, can_fund_onchain);

        let (outcome, hops, total_fee) = match decision {
            SettlementDecision::RoutedOffChain(q) => {
                state
                    .apply_route(&q)
                    .expect("quote computed against the current state");
                (Outcome::Routed, q.hops(), q.total_fee)
            }
            SettlementDecision::OnChainTooExpensive(q) => {
                state
                    .direct_transfer(tx)
                    .expect("funding checked before deciding");
                (Outcome::TooExpensive, q.hops(), q.total_fee)
            }
            SettlementDecision::OnChainNoRoute => {
                state
                    .direct_transfer(tx)
                    .expect("funding checked before deciding");
                (Outcome::NoRoute, 0, Amount::ZERO)
            }
            SettlementDecision::FailedInsufficientFunds => {
                (Outcome::Failed, 0, Amount::ZERO)
            }
        };
        records.push(TxRecord {
            id: i as u32,
            sender: tx.sender,
            receiver: tx.receiver,
            amount: tx.amount,
            outcome,
            hops,
            total_fee,
        });

        let done = (i + 1) as u32;
        if done.is_multiple_of(AUDIT_INTERVAL) && !state.conservation_holds() {
            return Err(SimError::ConservationViolated {
                after_transactions: done,
            });
        }
    }
    if !state.conservation_holds() {
        return Err(SimError::ConservationViolated {
            after_transactions: records.len() as u32,
        });
    }

    let report = SimReport::build(cfg.clone(), records, &state, chain_fees_bootstrap);
    Ok((report, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::Transaction;
    use crate::report::Outcome;

    fn small_cfg() -> SimConfig {
        SimConfig {
            n_nodes: 100,
            n_transactions: 2_000,
            seed: 7,
            ..SimConfig::default()
        }
    }

    #[test]
    fn bootstrap_defaults_open_all_channels() {
        let cfg = SimConfig::default();
        let workload = Workload::generate(&cfg.workload()).unwrap();
        let state = bootstrap(&cfg, &workload.edges).unwrap();
        assert_eq!(state.num_channels(), 1996);
        // 1996 channel openings at 0.41 each
        assert_eq!(state.burned(), Amount::from_ticks(1996 * 4_100));
        assert!(state.conservation_holds());
        for (_, ch) in state.channels() {
            assert_eq!(ch.total(), Amount::from_units(2000));
        }
    }

    #[test]
    fn bootstrap_without_funds_fails() {
        let cfg = SimConfig {
            initial_balance: Amount::ZERO,
            ..SimConfig::default()
        };
        let workload = Workload::generate(&cfg.workload()).unwrap();
        let err = bootstrap(&cfg, &workload.edges).unwrap_err();
        assert!(matches!(
            err,
            SimError::Ledger(LedgerError::InsufficientBalance { .. })
        ));
    }

    #[test]
    fn bootstrap_two_nodes_single_edge() {
        let cfg = SimConfig {
            n_nodes: 2,
            ba_m: 1,
            ..SimConfig::default()
        };
        let edges = [(NodeId(1), NodeId(0))];
        let state = bootstrap(&cfg, &edges).unwrap();
        assert_eq!(state.balance(NodeId(0)), Amount::from_units(999_000));
        assert_eq!(
            state.balance(NodeId(1)),
            Amount::from_units(999_000) - Amount::from_ticks(4_100)
        );
    }

    #[test]
    fn zero_transactions_leave_the_bootstrap_state() {
        let cfg = SimConfig {
            n_nodes: 20,
            n_transactions: 0,
            ..SimConfig::default()
        };
        let workload = Workload::generate(&cfg.workload()).unwrap();
        let bootstrapped = bootstrap(&cfg, &workload.edges).unwrap();
        let (report, state) = run_with_workload(&cfg, &workload).unwrap();
        assert!(report.records.is_empty());
        assert_eq!(report.totals.transactions, 0);
        assert_eq!(state.dump(), bootstrapped.dump());
    }

    #[test]
    fn unroutable_amount_falls_back_to_chain() {
        // amount above the whole channel total can never be routed
        let cfg = SimConfig {
            n_nodes: 4,
            ba_m: 1,
            ..SimConfig::default()
        };
        let edges = [
            (NodeId(1), NodeId(0)),
            (NodeId(2), NodeId(1)),
            (NodeId(3), NodeId(2)),
        ];
        let workload = Workload {
            edges: edges.to_vec(),
            transactions: vec![Transaction::new(
                NodeId(0),
                NodeId(3),
                Amount::from_units(2500),
            )],
        };
        let (report, state) = run_with_workload(&cfg, &workload).unwrap();
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.records[0].outcome, Outcome::NoRoute);
        // node 0 funded one channel as the non-initiating side (999000 left),
        // then paid 2500 + 0.41 on chain
        assert_eq!(
            state.balance(NodeId(0)),
            Amount::from_units(999_000) - Amount::from_units(2500) - Amount::from_ticks(4_100)
        );
        // node 3 initiated its channel open (999000 - 0.41), then received 2500
        assert_eq!(
            state.balance(NodeId(3)),
            Amount::from_units(999_000) - Amount::from_ticks(4_100) + Amount::from_units(2500)
        );
        assert!(state.conservation_holds());
    }

    #[test]
    fn decision_consistency_and_aggregates() {
        let cfg = small_cfg();
        let report = run(&cfg).unwrap();
        let t = &report.totals;
        assert_eq!(
            t.routed_offchain
                + t.onchain_too_expensive
                + t.onchain_no_route
                + t.failed_insufficient_funds,
            t.transactions
        );
        assert_eq!(t.route_found, t.routed_offchain + t.onchain_too_expensive);
        assert!(t.conservation_ok);

        let mut volume = Amount::ZERO;
        for r in &report.records {
            match r.outcome {
                Outcome::Routed => {
                    assert!(r.total_fee <= cfg.chain_fee);
                    if r.hops == 1 {
                        assert_eq!(r.total_fee, Amount::ZERO);
                    }
                }
                Outcome::TooExpensive => assert!(r.total_fee > cfg.chain_fee),
                Outcome::NoRoute | Outcome::Failed => {
                    assert_eq!(r.hops, 0);
                    assert_eq!(r.total_fee, Amount::ZERO);
                }
            }
            if r.outcome != Outcome::Failed {
                volume += r.amount;
            }
        }
        assert_eq!(t.transferred_volume, volume);

        let histogram_total: u64 = report
            .amount_histogram
            .iter()
            .flat_map(|b| b.counts)
            .sum();
        assert_eq!(histogram_total, u64::from(t.transactions));
        assert_eq!(report.node_stats.len(), cfg.n_nodes as usize);
        assert_eq!(
            t.naive_onchain_cost,
            Amount::from_ticks(u64::from(t.transactions) * cfg.chain_fee.ticks())
        );
    }

    #[test]
    fn replayed_workload_reproduces_the_run() {
        let cfg = small_cfg();
        let workload = Workload::generate(&cfg.workload()).unwrap();
        let mut csv = Vec::new();
        workload.write_csv(&mut csv).unwrap();
        let replayed = Workload::read_csv(&csv[..]).unwrap();
        let (a, _) = run_with_workload(&cfg, &workload).unwrap();
        let (b, _) = run_with_workload(&cfg, &replayed).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.totals, b.totals);
    }

    #[test]
    fn workload_must_fit_the_network() {
        let cfg = SimConfig {
            n_nodes: 3,
            ba_m: 1,
            ..SimConfig::default()
        };
        let workload = Workload {
            edges: vec![(NodeId(5), NodeId(0))],
            transactions: vec![],
        };
        assert!(matches!(
            run_with_workload(&cfg, &workload),
            Err(SimError::WorkloadMismatch(_))
        ));
    }
}
