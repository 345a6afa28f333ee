//! Network state: node accounts, bilateral channels and the operations that
//! move money between them.
//!
//! Money never appears or disappears. Every operation preserves
//! `sum(balances) + sum(channel totals) + burned == initial funds` exactly,
//! in ticks; on-chain fees are burned rather than credited to anyone. Route
//! application shifts capacity inside channels and leaves both channel
//! totals and on-chain balances untouched.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::amount::Amount;
use crate::router::RouteQuote;

/// Dense node identifier, stable for the lifetime of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl serde::Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u32(self.0)
    }
}

/// Handle to an open channel. Ids are never reused within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelId(u32);

impl ChannelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A payment request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transaction {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub amount: Amount,
}

impl Transaction {
    pub fn new(sender: NodeId, receiver: NodeId, amount: Amount) -> Transaction {
        debug_assert!(sender != receiver, "self-payment");
        debug_assert!(!amount.is_zero(), "zero payment");
        Transaction {
            sender,
            receiver,
            amount,
        }
    }
}

/// One bilateral channel. The two directional capacities always sum to
/// `total` between open and close; routing only moves capacity between the
/// two directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Channel {
    a: NodeId,
    b: NodeId,
    cap_ab: Amount,
    cap_ba: Amount,
    total: Amount,
}

impl Channel {
    pub fn endpoints(&self) -> (NodeId, NodeId) {
        (self.a, self.b)
    }

    pub fn peer(&self, node: NodeId) -> NodeId {
        debug_assert!(node == self.a || node == self.b);
        if node == self.a { self.b } else { self.a }
    }

    /// Capacity available for payments moving out of `from`.
    pub fn capacity_from(&self, from: NodeId) -> Amount {
        debug_assert!(from == self.a || from == self.b);
        if from == self.a { self.cap_ab } else { self.cap_ba }
    }

    pub fn total(&self) -> Amount {
        self.total
    }

    fn shift(&mut self, from: NodeId, amount: Amount) {
        if from == self.a {
            self.cap_ab -= amount;
            self.cap_ba += amount;
        } else {
            self.cap_ba -= amount;
            self.cap_ab += amount;
        }
        debug_assert_eq!(self.cap_ab + self.cap_ba, self.total);
    }
}

/// Per-node on-chain balance plus cumulative forwarding earnings
/// (`earned_fees` is statistics only; the money itself sits in channels).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeAccount {
    pub balance: Amount,
    pub earned_fees: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("channel between {a} and {b} already exists")]
    DuplicateChannel { a: NodeId, b: NodeId },
    #[error("no such channel {0}")]
    NoSuchChannel(ChannelId),
    #[error("node {node} has insufficient balance: required {required}, available {available}")]
    InsufficientBalance {
        node: NodeId,
        required: Amount,
        available: Amount,
    },
    #[error("stale quote: edge {from}->{to} requires {required}, capacity is {available}")]
    StaleQuote {
        from: NodeId,
        to: NodeId,
        required: Amount,
        available: Amount,
    },
    #[error("invalid channel endpoints ({a}, {b})")]
    InvalidEndpoints { a: NodeId, b: NodeId },
    #[error("node {0} is not an endpoint of the channel")]
    NotAnEndpoint(NodeId),
}

impl LedgerError {
    /// For `InsufficientBalance`: how much money is missing.
    pub fn shortfall(&self) -> Option<Amount> {
        match self {
            LedgerError::InsufficientBalance {
                required, available, ..
            } => required.checked_sub(*available),
            _ => None,
        }
    }
}

/// The directed channel graph plus all on-chain accounts.
///
/// All mutating operations are applied sequentially; read-only routing
/// queries can run against a snapshot and are revalidated by
/// [`NetworkState::apply_route`].
#[derive(Debug, Clone)]
pub struct NetworkState {
    accounts: Vec<NodeAccount>,
    channels: Vec<Option<Channel>>,
    by_pair: HashMap<(NodeId, NodeId), ChannelId>,
    adjacency: Vec<Vec<ChannelId>>,
    burned: Amount,
    chain_fee: Amount,
    initial_funds: Amount,
}

impl NetworkState {
    /// All nodes start with the same on-chain balance and no channels.
    pub fn new(n_nodes: u32, initial_balance: Amount, chain_fee: Amount) -> NetworkState {
        Self::with_balances(vec![initial_balance; n_nodes as usize], chain_fee)
    }

    pub fn with_balances(balances: Vec<Amount>, chain_fee: Amount) -> NetworkState {
        let initial_funds = balances.iter().sum();
        let accounts = balances
            .into_iter()
            .map(|balance| NodeAccount {
                balance,
                earned_fees: Amount::ZERO,
            })
            .collect::<Vec<_>>();
        let n = accounts.len();
        NetworkState {
            accounts,
            channels: Vec::new(),
            by_pair: HashMap::new(),
            adjacency: vec![Vec::new(); n],
            burned: Amount::ZERO,
            chain_fee,
            initial_funds,
        }
    }

    pub fn num_nodes(&self) -> u32 {
        self.accounts.len() as u32
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + use<> {
        (0..self.num_nodes()).map(NodeId)
    }

    pub fn account(&self, node: NodeId) -> &NodeAccount {
        &self.accounts[node.index()]
    }

    pub fn balance(&self, node: NodeId) -> Amount {
        self.accounts[node.index()].balance
    }

    pub fn earned_fees(&self, node: NodeId) -> Amount {
        self.accounts[node.index()].earned_fees
    }

    pub fn chain_fee(&self) -> Amount {
        self.chain_fee
    }

    pub fn burned(&self) -> Amount {
        self.burned
    }

    pub fn initial_funds(&self) -> Amount {
        self.initial_funds
    }

    pub fn channel(&self, id: ChannelId) -> Option<&Channel> {
        self.channels.get(id.index()).and_then(Option::as_ref)
    }

    pub fn channel_between(&self, a: NodeId, b: NodeId) -> Option<(ChannelId, &Channel)> {
        let id = *self.by_pair.get(&pair_key(a, b))?;
        Some((id, self.channels[id.index()].as_ref()?))
    }

    /// Directed capacity `from -> to`, if such a channel is open.
    pub fn capacity(&self, from: NodeId, to: NodeId) -> Option<Amount> {
        self.channel_between(from, to)
            .map(|(_, ch)| ch.capacity_from(from))
    }

    /// Open channels in id order.
    pub fn channels(&self) -> impl Iterator<Item = (ChannelId, &Channel)> {
        self.channels
            .iter()
            .enumerate()
            .filter_map(|(i, ch)| ch.as_ref().map(|c| (ChannelId(i as u32), c)))
    }

    pub fn num_channels(&self) -> usize {
        self.channels.iter().filter(|c| c.is_some()).count()
    }

    /// Channels incident to `node`, as `(peer, channel id)`.
    pub fn neighbors(&self, node: NodeId) -> impl Iterator<Item = (NodeId, ChannelId)> {
        self.adjacency[node.index()].iter().map(move |&id| {
            let ch = self.channels[id.index()].as_ref().expect("adjacency is live");
            (ch.peer(node), id)
        })
    }

    pub fn degree(&self, node: NodeId) -> u32 {
        self.adjacency[node.index()].len() as u32
    }

    /// On-chain balance plus this node's side of every channel it is in.
    pub fn wealth(&self, node: NodeId) -> Amount {
        let in_channels: Amount = self.adjacency[node.index()]
            .iter()
            .map(|&id| {
                self.channels[id.index()]
                    .as_ref()
                    .expect("adjacency is live")
                    .capacity_from(node)
            })
            .sum();
        self.balance(node) + in_channels
    }

    pub fn total_channel_funds(&self) -> Amount {
        self.channels().map(|(_, ch)| ch.total()).sum()
    }

    /// Exact conservation check over the whole system.
    pub fn conservation_holds(&self) -> bool {
        let balances: Amount = self.accounts.iter().map(|a| a.balance).sum();
        balances + self.total_channel_funds() + self.burned == self.initial_funds
    }

    /// Opens a channel funded with `fund_a` from `a` and `fund_b` from `b`.
    /// The initiator `a` additionally pays the on-chain fee.
    pub fn open_channel(
        &mut self,
        a: NodeId,
        b: NodeId,
        fund_a: Amount,
        fund_b: Amount,
    ) -> Result<ChannelId, LedgerError> {
        if a == b || a.index() >= self.accounts.len() || b.index() >= self.accounts.len() {
            return Err(LedgerError::InvalidEndpoints { a, b });
        }
        if self.by_pair.contains_key(&pair_key(a, b)) {
            return Err(LedgerError::DuplicateChannel { a, b });
        }
        let required_a = fund_a + self.chain_fee;
        self.require_balance(a, required_a)?;
        self.require_balance(b, fund_b)?;

        self.accounts[a.index()].balance -= required_a;
        self.accounts[b.index()].balance -= fund_b;
        self.burned += self.chain_fee;

        let id = ChannelId(self.channels.len() as u32);
        self.channels.push(Some(Channel {
            a,
            b,
            cap_ab: fund_a,
            cap_ba: fund_b,
            total: fund_a + fund_b,
        }));
        self.by_pair.insert(pair_key(a, b), id);
        self.adjacency[a.index()].push(id);
        self.adjacency[b.index()].push(id);
        Ok(id)
    }

    /// Settles a channel on chain: each side recovers its current capacity,
    /// the initiator pays the on-chain fee.
    pub fn close_channel(&mut self, id: ChannelId, initiator: NodeId) -> Result<(), LedgerError> {
        let ch = self
            .channels
            .get(id.index())
            .and_then(Option::as_ref)
            .ok_or(LedgerError::NoSuchChannel(id))?;
        let (a, b) = ch.endpoints();
        if initiator != a && initiator != b {
            return Err(LedgerError::NotAnEndpoint(initiator));
        }
        self.require_balance(initiator, self.chain_fee)?;
        let (cap_ab, cap_ba) = (ch.cap_ab, ch.cap_ba);

        self.accounts[a.index()].balance += cap_ab;
        self.accounts[b.index()].balance += cap_ba;
        self.accounts[initiator.index()].balance -= self.chain_fee;
        self.burned += self.chain_fee;

        self.channels[id.index()] = None;
        self.by_pair.remove(&pair_key(a, b));
        self.adjacency[a.index()].retain(|&c| c != id);
        self.adjacency[b.index()].retain(|&c| c != id);
        Ok(())
    }

    /// A regular on-chain payment, bypassing the channel network.
    pub fn direct_transfer(&mut self, tx: &Transaction) -> Result<(), LedgerError> {
        let required = tx.amount + self.chain_fee;
        self.require_balance(tx.sender, required)?;
        self.accounts[tx.sender.index()].balance -= required;
        self.accounts[tx.receiver.index()].balance += tx.amount;
        self.burned += self.chain_fee;
        Ok(())
    }

    /// Executes an off-chain route, all-or-nothing.
    ///
    /// Every edge's capacity is revalidated against the flows recorded in the
    /// quote before anything is touched; a failed check leaves the state
    /// bit-identical and reports the first stale edge. On success each edge
    /// shifts its flow from the forward to the reverse direction and every
    /// intermediate forwarder's `earned_fees` grows by the fee it kept.
    pub fn apply_route(&mut self, quote: &RouteQuote) -> Result<(), LedgerError> {
        let hops = quote.edge_flows.len();
        assert_eq!(quote.path.len(), hops + 1, "malformed quote");

        let mut channel_ids = Vec::with_capacity(hops);
        for (i, &flow) in quote.edge_flows.iter().enumerate() {
            let (from, to) = (quote.path[i], quote.path[i + 1]);
            let stale = |available| LedgerError::StaleQuote {
                from,
                to,
                required: flow,
                available,
            };
            let (id, available) = self
                .channel_between(from, to)
                .map(|(id, ch)| (id, ch.capacity_from(from)))
                .ok_or_else(|| stale(Amount::ZERO))?;
            if available < flow {
                return Err(stale(available));
            }
            channel_ids.push(id);
        }

        for (i, &flow) in quote.edge_flows.iter().enumerate() {
            let from = quote.path[i];
            self.channels[channel_ids[i].index()]
                .as_mut()
                .expect("validated above")
                .shift(from, flow);
        }
        for i in 1..hops {
            let forwarder = quote.path[i];
            let kept = quote.edge_flows[i - 1] - quote.edge_flows[i];
            self.accounts[forwarder.index()].earned_fees += kept;
        }
        Ok(())
    }

    /// Deterministic plain-text serialization of the full state, sorted by
    /// node id and channel endpoints. Suitable for golden tests and for
    /// persisting failing test instances.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(out, "nodes {}", self.num_nodes()).unwrap();
        for (i, account) in self.accounts.iter().enumerate() {
            writeln!(
                out,
                "node {} balance {} earned_fees {}",
                i, account.balance, account.earned_fees
            )
            .unwrap();
        }
        let mut chans: Vec<&Channel> = self.channels().map(|(_, c)| c).collect();
        chans.sort_by_key(|ch| pair_key(ch.a, ch.b));
        writeln!(out, "channels {}", chans.len()).unwrap();
        for ch in chans {
            let (lo, hi) = pair_key(ch.a, ch.b);
            let (cap_lo_hi, cap_hi_lo) = (ch.capacity_from(lo), ch.capacity_from(hi));
            writeln!(
                out,
                "channel {lo} {hi} cap_ab {cap_lo_hi} cap_ba {cap_hi_lo} total {}",
                ch.total
            )
            .unwrap();
        }
        writeln!(out, "burned {}", self.burned).unwrap();
        writeln!(out, "chain_fee {}", self.chain_fee).unwrap();
        out
    }

    fn require_balance(&self, node: NodeId, required: Amount) -> Result<(), LedgerError> {
        let available = self.balance(node);
        if available < required {
            return Err(LedgerError::InsufficientBalance {
                node,
                required,
                available,
            });
        }
        Ok(())
    }
}

fn pair_key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b { (a, b) } else { (b, a) }
}
