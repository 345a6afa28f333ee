//! Fee-aware cheapest-path routing with capacity feasibility.
//!
//! Plain Dijkstra breaks down here: extending a path increases the amount
//! that must flow over every earlier edge (each forwarder's fee rides along),
//! so edge feasibility depends on the part of the route that is not known
//! yet. Searching backwards fixes this. We run a label-setting search from
//! the *receiver* over reversed edges; a node's label is the exact fee sum
//! from that node to the receiver, so when an original edge `j -> i` is
//! examined the full downstream flow `amount + cost(i)` is already known and
//! can be checked against the edge capacity. Settled labels are therefore
//! final, and the resulting tree is a cheapest spanning tree of feasible
//! routes toward the receiver.
//!
//! A tree is valid for exactly one `(receiver, amount, state snapshot)`
//! triple: feasibility depends on the amount, and capacities move with every
//! applied route.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::amount::Amount;
use crate::fees::FeePolicy;
use crate::ledger::{NetworkState, NodeId, Transaction};

/// Which capacity feasibility test an edge must pass during the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityCheck {
    /// `cost(i) + amount <= capacity(j -> i)`: the edge must carry the
    /// amount plus the fees of forwarders strictly downstream, which is
    /// exactly the flow that crosses it when the route executes.
    #[default]
    Tight,
    /// `cost(i) + fee(j -> i) + amount <= capacity(j -> i)`: additionally
    /// reserves the crossing edge's own fee. Conservative by one fee;
    /// kept selectable for comparison runs.
    PaperLiteral,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Label {
    cost: Amount,
    hops: u32,
    /// Next hop toward the receiver; `None` only for the receiver itself.
    next: Option<NodeId>,
}

/// Receiver-rooted cheapest spanning tree for one payment amount.
///
/// `cost(v)` is the minimum total of forwarder fees on any feasible route
/// from `v` to the receiver, counting every edge fee on the way (a sender
/// querying the tree excludes its own first-edge fee, see
/// [`cheapest_path`]). Unreachable nodes have no label.
#[derive(Debug, Clone)]
pub struct CostTree {
    receiver: NodeId,
    amount: Amount,
    labels: Vec<Option<Label>>,
}

impl CostTree {
    pub fn receiver(&self) -> NodeId {
        self.receiver
    }

    pub fn amount(&self) -> Amount {
        self.amount
    }

    /// Accumulated fees from `node` to the receiver; `None` when no
    /// feasible route exists.
    pub fn cost(&self, node: NodeId) -> Option<Amount> {
        self.labels[node.index()].as_ref().map(|l| l.cost)
    }

    pub fn hops(&self, node: NodeId) -> Option<u32> {
        self.labels[node.index()].as_ref().map(|l| l.hops)
    }

    pub fn next_hop(&self, node: NodeId) -> Option<NodeId> {
        self.labels[node.index()].as_ref().and_then(|l| l.next)
    }

    /// The tree path `node, ..., receiver`, if the node is reachable.
    pub fn path_to_receiver(&self, node: NodeId) -> Option<Vec<NodeId>> {
        self.labels[node.index()].as_ref()?;
        let mut path = vec![node];
        let mut cur = node;
        while cur != self.receiver {
            cur = self.next_hop(cur).expect("finite label has a next hop");
            path.push(cur);
        }
        Some(path)
    }

    fn label(&self, node: NodeId) -> Option<&Label> {
        self.labels[node.index()].as_ref()
    }
}

/// A feasible directed route with per-edge flows.
///
/// Flows carry downstream fees: the flow over an edge is the payment amount
/// plus the fees of every forwarder strictly after that edge, so consecutive
/// flows differ by exactly the fee of the node between them and the last
/// flow equals the amount. `total_fee` excludes the sender's own fee.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteQuote {
    pub path: Vec<NodeId>,
    pub edge_flows: Vec<Amount>,
    pub total_fee: Amount,
    pub amount: Amount,
}

impl RouteQuote {
    pub fn hops(&self) -> u32 {
        self.edge_flows.len() as u32
    }

    pub fn sender(&self) -> NodeId {
        self.path[0]
    }

    pub fn receiver(&self) -> NodeId {
        *self.path.last().expect("non-empty path")
    }

    /// Structural invariants; used by tests and debug assertions.
    pub fn validate(&self) -> Result<(), String> {
        if self.path.len() < 2 || self.edge_flows.len() + 1 != self.path.len() {
            return Err("path/flow length mismatch".into());
        }
        let mut seen = self.path.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.path.len() {
            return Err("path revisits a node".into());
        }
        if *self.edge_flows.last().unwrap() != self.amount {
            return Err("last flow must equal the amount".into());
        }
        for w in self.edge_flows.windows(2) {
            if w[0] < w[1] {
                return Err("flows must be non-increasing along the path".into());
            }
        }
        if self.edge_flows[0] != self.amount + self.total_fee {
            return Err("first flow must be amount + total_fee".into());
        }
        Ok(())
    }
}

/// How a transaction gets settled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SettlementDecision {
    /// Route exists and its fees do not exceed the on-chain fee.
    RoutedOffChain(RouteQuote),
    /// Route exists but settling on chain is cheaper.
    OnChainTooExpensive(RouteQuote),
    /// No feasible route; falls back to an on-chain transaction.
    OnChainNoRoute,
    /// The chosen settlement cannot be funded.
    FailedInsufficientFunds,
}

/// Builds the full cheapest spanning tree toward `receiver` for `amount`.
pub fn build_cost_tree(
    state: &NetworkState,
    policy: &FeePolicy,
    check: CapacityCheck,
    receiver: NodeId,
    amount: Amount,
) -> CostTree {
    search(state, policy, check, receiver, amount, None)
}

/// Cheapest feasible route for `tx`, or `None` when no route exists.
///
/// Selects, among the sender's channel peers `u` with a final label, the one
/// minimizing `(cost(u), hops, peer id)` subject to first-edge feasibility,
/// then materializes the tree path. Excluding the sender's own fee happens
/// here: the returned fee is `cost(u)`, the fees of the actual forwarders.
pub fn cheapest_path(
    state: &NetworkState,
    policy: &FeePolicy,
    check: CapacityCheck,
    tx: &Transaction,
) -> Option<RouteQuote> {
    if tx.sender == tx.receiver || tx.amount.is_zero() {
        return None;
    }
    let stop: Vec<NodeId> = state.neighbors(tx.sender).map(|(peer, _)| peer).collect();
    if stop.is_empty() {
        return None;
    }
    let tree = search(state, policy, check, tx.receiver, tx.amount, Some(&stop));
    quote_from_tree(state, policy, check, &tree, tx.sender)
}

/// Derives a sender's quote from a previously built tree. The tree must
/// stem from the same state snapshot and the same amount.
pub fn quote_from_tree(
    state: &NetworkState,
    policy: &FeePolicy,
    check: CapacityCheck,
    tree: &CostTree,
    sender: NodeId,
) -> Option<RouteQuote> {
    if sender == tree.receiver() {
        return None;
    }
    let amount = tree.amount();
    let mut best: Option<(Amount, u32, NodeId)> = None;
    for (peer, channel_id) in state.neighbors(sender) {
        let Some(label) = tree.label(peer) else {
            continue;
        };
        let channel = state.channel(channel_id).expect("live channel");
        let cap_first = channel.capacity_from(sender);
        if cap_first.is_zero() {
            continue;
        }
        let Some(mut required) = amount.checked_add(label.cost) else {
            continue;
        };
        if check == CapacityCheck::PaperLiteral {
            // Reserve the sender's own (uncharged) fee too, mirroring the
            // conservative relaxation rule.
            let own_fee = policy
                .edge_fee(cap_first, channel.capacity_from(peer), amount)
                .expect("nonzero forward capacity");
            required = required.checked_add(own_fee)?;
        }
        if required > cap_first {
            continue;
        }
        let candidate = (label.cost, label.hops, peer);
        if best.is_none_or(|cur| candidate < cur) {
            best = Some(candidate);
        }
    }
    let (total_fee, _, first_peer) = best?;

    let mut path = vec![sender];
    let mut cur = first_peer;
    loop {
        path.push(cur);
        if cur == tree.receiver() {
            break;
        }
        cur = tree.next_hop(cur).expect("finite label has a next hop");
    }
    let edge_flows: Vec<Amount> = path[1..]
        .iter()
        .map(|&node| amount + tree.cost(node).expect("on-tree node"))
        .collect();
    let quote = RouteQuote {
        path,
        edge_flows,
        total_fee,
        amount,
    };
    debug_assert_eq!(quote.validate(), Ok(()));
    Some(quote)
}

/// Settlement rule: route off chain when the route's fees do not exceed the
/// on-chain fee (ties route off chain), otherwise fall back to the chain —
/// which requires the sender to be able to fund `amount + chain_fee`.
pub fn decide(
    quote: Option<RouteQuote>,
    chain_fee: Amount,
    can_fund_onchain: bool,
) -> SettlementDecision {
    match quote {
        Some(q) if q.total_fee <= chain_fee => SettlementDecision::RoutedOffChain(q),
        Some(q) if can_fund_onchain => SettlementDecision::OnChainTooExpensive(q),
        None if can_fund_onchain => SettlementDecision::OnChainNoRoute,
        _ => SettlementDecision::FailedInsufficientFunds,
    }
}

/// Label-setting search from the receiver over reversed edges.
///
/// Labels are ordered by `(cost, hops, next hop id)`, which both fixes the
/// settle order and makes the resulting tree canonical regardless of edge
/// iteration order. With `stop_when_settled` the search ends once every
/// listed node is settled; settled labels are final either way.
fn search(
    state: &NetworkState,
    policy: &FeePolicy,
    check: CapacityCheck,
    receiver: NodeId,
    amount: Amount,
    stop_when_settled: Option<&[NodeId]>,
) -> CostTree {
    let n = state.num_nodes() as usize;
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut remaining_stops = stop_when_settled.map(|s| s.len());
    let is_stop = |node: NodeId| {
        stop_when_settled
            .map(|s| s.contains(&node))
            .unwrap_or(false)
    };

    labels[receiver.index()] = Some(Label {
        cost: Amount::ZERO,
        hops: 0,
        next: None,
    });
    let mut heap: BinaryHeap<Reverse<(Amount, u32, u32)>> = BinaryHeap::new();
    heap.push(Reverse((Amount::ZERO, 0, receiver.0)));

    while let Some(Reverse((cost, hops, raw))) = heap.pop() {
        let settled_node = NodeId(raw);
        if settled[settled_node.index()] {
            continue;
        }
        {
            let label = labels[settled_node.index()].as_ref().expect("pushed label");
            if (label.cost, label.hops) != (cost, hops) {
                continue; // superseded entry
            }
        }
        settled[settled_node.index()] = true;
        if is_stop(settled_node) {
            let left = remaining_stops.as_mut().expect("stop set present");
            *left -= 1;
            if *left == 0 {
                break;
            }
        }

        // Relax original edges `peer -> settled_node` (reversed orientation).
        for (peer, channel_id) in state.neighbors(settled_node) {
            if settled[peer.index()] {
                continue;
            }
            let channel = state.channel(channel_id).expect("live channel");
            let cap_forward = channel.capacity_from(peer);
            if cap_forward.is_zero() {
                continue;
            }
            let cap_reverse = channel.capacity_from(settled_node);

            let fee = match check {
                CapacityCheck::Tight => {
                    match cost.checked_add(amount) {
                        Some(required) if required <= cap_forward => {}
                        _ => continue,
                    }
                    policy
                        .edge_fee(cap_forward, cap_reverse, amount)
                        .expect("nonzero forward capacity")
                }
                CapacityCheck::PaperLiteral => {
                    let fee = policy
                        .edge_fee(cap_forward, cap_reverse, amount)
                        .expect("nonzero forward capacity");
                    match cost
                        .checked_add(fee)
                        .and_then(|c| c.checked_add(amount))
                    {
                        Some(required) if required <= cap_forward => {}
                        _ => continue,
                    }
                    fee
                }
            };

            let Some(cand_cost) = cost.checked_add(fee) else {
                continue;
            };
            let cand = (cand_cost, hops + 1, settled_node.0);
            let improves = match &labels[peer.index()] {
                None => true,
                Some(old) => {
                    cand < (old.cost, old.hops, old.next.expect("non-root label").0)
                }
            };
            if improves {
                labels[peer.index()] = Some(Label {
                    cost: cand_cost,
                    hops: hops + 1,
                    next: Some(settled_node),
                });
                heap.push(Reverse((cand_cost, hops + 1, peer.0)));
            }
        }
    }

    CostTree {
        receiver,
        amount,
        labels,
    }
}
