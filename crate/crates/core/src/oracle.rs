//! Ground-truth validators for small instances.
//!
//! Two independent checks certify the router: an exhaustive enumeration of
//! all simple sender-to-receiver paths (an exact optimum for any instance
//! small enough to enumerate), and a feasibility verifier that replays the
//! flow-preservation and cut constraints of the underlying optimization
//! problem by enumerating node subsets. Both deliberately share no code with
//! the routing search.

use thiserror::Error;

use crate::amount::Amount;
use crate::fees::{FeeError, FeePolicy};
use crate::ledger::{NetworkState, NodeId, Transaction};
use crate::router::CapacityCheck;

/// Exhaustive path search refuses instances above this size.
pub const MAX_EXHAUSTIVE_NODES: u32 = 12;
/// Subset enumeration refuses instances above this size.
pub const MAX_CUT_NODES: u32 = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance too large: {nodes} nodes (limit {limit})")]
    InstanceTooLarge { nodes: u32, limit: u32 },
    #[error(transparent)]
    Fee(#[from] FeeError),
}

/// The cheapest feasible simple path for `tx`, found by enumerating every
/// simple directed path from sender to receiver and checking each edge's
/// capacity against the flow it would have to carry. Returns the path and
/// its total fee (the sender's own fee excluded); ties break on fewer hops,
/// then lexicographically smaller path.
pub fn exhaustive_cheapest_path(
    state: &NetworkState,
    policy: &FeePolicy,
    check: CapacityCheck,
    tx: &Transaction,
) -> Result<Option<(Vec<NodeId>, Amount)>, OracleError> {
    let n = state.num_nodes();
    if n > MAX_EXHAUSTIVE_NODES {
        return Err(OracleError::InstanceTooLarge {
            nodes: n,
            limit: MAX_EXHAUSTIVE_NODES,
        });
    }

    let mut best: Option<(Amount, usize, Vec<NodeId>)> = None;
    let mut path = vec![tx.sender];
    let mut visited = vec![false; n as usize];
    visited[tx.sender.index()] = true;
    dfs(state, policy, check, tx, &mut path, &mut visited, &mut best)?;
    Ok(best.map(|(fee, _, path)| (path, fee)))
}

fn dfs(
    state: &NetworkState,
    policy: &FeePolicy,
    check: CapacityCheck,
    tx: &Transaction,
    path: &mut Vec<NodeId>,
    visited: &mut [bool],
    best: &mut Option<(Amount, usize, Vec<NodeId>)>,
) -> Result<(), OracleError> {
    let here = *path.last().unwrap();
    if here == tx.receiver {
        if let Some(fee) = evaluate_path(state, policy, check, path, tx.amount)? {
            let candidate = (fee, path.len() - 1, path.clone());
            if best.as_ref().is_none_or(|cur| candidate < *cur) {
                *best = Some(candidate);
            }
        }
        return Ok(());
    }
    for (peer, channel_id) in state.neighbors(here) {
        if visited[peer.index()] {
            continue;
        }
        let channel = state.channel(channel_id).expect("live channel");
        // every edge must carry at least the amount, whatever the fees
        if channel.capacity_from(here) < tx.amount {
            continue;
        }
        visited[peer.index()] = true;
        path.push(peer);
        dfs(state, policy, check, tx, path, visited, best)?;
        path.pop();
        visited[peer.index()] = false;
    }
    Ok(())
}

/// Fee total for one complete candidate path, or `None` if some edge cannot
/// carry its flow.
fn evaluate_path(
    state: &NetworkState,
    policy: &FeePolicy,
    check: CapacityCheck,
    path: &[NodeId],
    amount: Amount,
) -> Result<Option<Amount>, OracleError> {
    let hops = path.len() - 1;
    let mut fees = Vec::with_capacity(hops);
    let mut caps = Vec::with_capacity(hops);
    for i in 0..hops {
        let (from, to) = (path[i], path[i + 1]);
        let (_, channel) = state.channel_between(from, to).expect("path edge");
        let cap_forward = channel.capacity_from(from);
        let cap_reverse = channel.capacity_from(to);
        fees.push(policy.edge_fee(cap_forward, cap_reverse, amount)?);
        caps.push(cap_forward);
    }
    // flows accumulate backward: amount plus all fees strictly downstream
    let mut flow = amount;
    for i in (0..hops).rev() {
        let required = match check {
            CapacityCheck::Tight => flow,
            CapacityCheck::PaperLiteral => flow + fees[i],
        };
        if required > caps[i] {
            return Ok(None);
        }
        flow += fees[i];
    }
    // the sender's own fee (first edge) is excluded from the path cost
    Ok(Some(fees.iter().skip(1).copied().sum()))
}

/// One violated capacity constraint: the channel capacity crossing out of
/// `subset` does not cover the amount plus the fees incurred beyond it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutViolation {
    pub subset: Vec<NodeId>,
    pub capacity_side: Amount,
    pub required_side: Amount,
}

/// Result of replaying the optimization constraints against one path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutCheckReport {
    /// Per node: does the path enter and leave it consistently (sender emits
    /// one unit of path, receiver absorbs one, everyone else is balanced)?
    pub preservation_ok: Vec<bool>,
    pub violated_cuts: Vec<CutViolation>,
}

impl CutCheckReport {
    pub fn is_feasible(&self) -> bool {
        self.preservation_ok.iter().all(|&ok| ok) && self.violated_cuts.is_empty()
    }
}

/// Verifies the preservation equalities and, for every sender-containing
/// subset `S` that excludes the receiver, the cut inequality
///
/// ```text
/// sum of capacities of path edges leaving S
///     >= amount + sum of fees of path edges entirely outside S
/// ```
///
/// Subsets containing the receiver cannot constrain a route (no path edge
/// leaves them toward the receiver), so the enumeration ranges over subsets
/// separating sender from receiver.
pub fn check_lp_constraints(
    state: &NetworkState,
    policy: &FeePolicy,
    path: &[NodeId],
    tx: &Transaction,
) -> Result<CutCheckReport, OracleError> {
    let n = state.num_nodes();
    if n > MAX_CUT_NODES {
        return Err(OracleError::InstanceTooLarge {
            nodes: n,
            limit: MAX_CUT_NODES,
        });
    }
    assert!(path.len() >= 2, "path must have at least one edge");
    assert_eq!(*path.first().unwrap(), tx.sender);
    assert_eq!(*path.last().unwrap(), tx.receiver);

    let edges: Vec<(NodeId, NodeId)> = path.windows(2).map(|w| (w[0], w[1])).collect();

    let mut out_degree = vec![0i32; n as usize];
    let mut in_degree = vec![0i32; n as usize];
    for &(from, to) in &edges {
        out_degree[from.index()] += 1;
        in_degree[to.index()] += 1;
    }
    let preservation_ok: Vec<bool> = (0..n)
        .map(|i| {
            let node = NodeId(i);
            let expected = if node == tx.sender {
                1
            } else if node == tx.receiver {
                -1
            } else {
                0
            };
            out_degree[node.index()] - in_degree[node.index()] == expected
        })
        .collect();

    let mut edge_caps = Vec::with_capacity(edges.len());
    let mut edge_fees = Vec::with_capacity(edges.len());
    for &(from, to) in &edges {
        let (_, channel) = state.channel_between(from, to).expect("path edge");
        let cap_forward = channel.capacity_from(from);
        let cap_reverse = channel.capacity_from(to);
        edge_caps.push(cap_forward);
        edge_fees.push(policy.edge_fee(cap_forward, cap_reverse, tx.amount)?);
    }

    let mut violated_cuts = Vec::new();
    let sender_bit = 1u32 << tx.sender.index();
    let receiver_bit = 1u32 << tx.receiver.index();
    for mask in 0u32..(1 << n) {
        if mask & sender_bit == 0 || mask & receiver_bit != 0 {
            continue;
        }
        let in_subset = |node: NodeId| mask & (1 << node.index()) != 0;
        let mut capacity_side = Amount::ZERO;
        let mut required_side = tx.amount;
        for (i, &(from, to)) in edges.iter().enumerate() {
            if in_subset(from) && !in_subset(to) {
                capacity_side += edge_caps[i];
            }
            if !in_subset(from) && !in_subset(to) {
                required_side += edge_fees[i];
            }
        }
        if capacity_side < required_side {
            violated_cuts.push(CutViolation {
                subset: (0..n).map(NodeId).filter(|&v| in_subset(v)).collect(),
                capacity_side,
                required_side,
            });
        }
    }

    Ok(CutCheckReport {
        preservation_ok,
        violated_cuts,
    })
}
