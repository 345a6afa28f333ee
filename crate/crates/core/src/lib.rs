//! Payment channel network simulator.
//!
//! Models a network of bilateral payment channels over a fee-charging
//! blockchain: an exact integer-tick ledger with conservation guarantees, a
//! pluggable per-edge fee policy (flat, proportional, imbalance-adjusted), a
//! capacity-aware cheapest-path router built on a receiver-rooted spanning
//! tree search, brute-force validation oracles, a scale-free workload
//! generator and an end-to-end simulation driver with CSV/JSON reporting.

pub mod amount;
pub mod fees;
pub mod ledger;
pub mod oracle;
pub mod report;
pub mod router;
pub mod sim;
pub mod workload;

pub use amount::{Amount, FeeRate, TICKS_PER_UNIT};
pub use fees::{FeeError, FeePolicy};
pub use ledger::{Channel, ChannelId, LedgerError, NetworkState, NodeAccount, NodeId, Transaction};
pub use oracle::{CutCheckReport, CutViolation, OracleError};
pub use report::{Outcome, SimReport, TxRecord};
pub use router::{CapacityCheck, CostTree, RouteQuote, SettlementDecision};
pub use sim::{SimConfig, SimError};
pub use workload::{Workload, WorkloadConfig, WorkloadError};
