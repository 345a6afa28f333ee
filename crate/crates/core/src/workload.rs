//! Experiment input generation: scale-free channel topology, lognormally
//! distributed payment amounts and uniformly random sender/receiver pairs,
//! all reproducible from a single 64-bit seed (ChaCha12 throughout).

use std::io::{BufRead, Write};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::{Amount, TICKS_PER_UNIT};
use crate::ledger::{NodeId, Transaction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub n_nodes: u32,
    /// Barabási–Albert attachment count: every joining node opens this many
    /// channels to existing nodes, chosen with degree-proportional odds.
    pub ba_m: u32,
    pub n_transactions: u32,
    /// Log-space mean of the payment amount distribution.
    pub lognormal_mu: f64,
    /// Log-space standard deviation of the payment amount distribution.
    pub lognormal_sigma: f64,
    pub seed: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            n_nodes: 1000,
            ba_m: 2,
            n_transactions: 100_000,
            lognormal_mu: 2.95,
            lognormal_sigma: 1.2,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("invalid workload config: {0}")]
    InvalidConfig(String),
    #[error("workload file: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for WorkloadError {
    fn from(e: std::io::Error) -> Self {
        WorkloadError::Io(e.to_string())
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.ba_m < 1 {
            return Err(WorkloadError::InvalidConfig("ba_m must be at least 1".into()));
        }
        if self.n_nodes <= self.ba_m {
            return Err(WorkloadError::InvalidConfig(format!(
                "n_nodes ({}) must exceed ba_m ({})",
                self.n_nodes, self.ba_m
            )));
        }
        if self.lognormal_sigma.is_nan() || self.lognormal_sigma <= 0.0 {
            return Err(WorkloadError::InvalidConfig("sigma must be positive".into()));
        }
        if !self.lognormal_mu.is_finite() {
            return Err(WorkloadError::InvalidConfig("mu must be finite".into()));
        }
        Ok(())
    }
}

/// A fully materialized experiment input: channel edges (as `(joining node,
/// chosen partner)`, in creation order) followed by the payment stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    pub edges: Vec<(NodeId, NodeId)>,
    pub transactions: Vec<Transaction>,
}

impl Workload {
    /// Generates topology first, then one `(pair, amount)` draw per
    /// transaction, from a single seeded stream.
    pub fn generate(cfg: &WorkloadConfig) -> Result<Workload, WorkloadError> {
        cfg.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        let edges = generate_topology(cfg, &mut rng);
        let mut transactions = Vec::with_capacity(cfg.n_transactions as usize);
        for _ in 0..cfg.n_transactions {
            let (sender, receiver) = sample_pair(cfg, &mut rng);
            let amount = sample_amount(cfg, &mut rng);
            transactions.push(Transaction::new(sender, receiver, amount));
        }
        Ok(Workload {
            edges,
            transactions,
        })
    }

    /// CSV export so identical workloads can be replayed elsewhere.
    /// One record per line: `edge,<joiner>,<partner>,` or
    /// `tx,<sender>,<receiver>,<amount>`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), WorkloadError> {
        writeln!(out, "kind,src,dst,amount")?;
        for &(a, b) in &self.edges {
            writeln!(out, "edge,{a},{b},")?;
        }
        for tx in &self.transactions {
            writeln!(out, "tx,{},{},{}", tx.sender, tx.receiver, tx.amount)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Workload, WorkloadError> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| WorkloadError::Format("empty workload file".into()))??;
        if header.trim() != "kind,src,dst,amount" {
            return Err(WorkloadError::Format(format!(
                "unexpected header `{header}`"
            )));
        }
        let mut edges = Vec::new();
        let mut transactions = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| {
                WorkloadError::Format(format!("line {}: {msg}: `{line}`", lineno + 2))
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            let src: u32 = fields[1].parse().map_err(|_| bad("bad src"))?;
            let dst: u32 = fields[2].parse().map_err(|_| bad("bad dst"))?;
            match fields[0] {
                "edge" => edges.push((NodeId(src), NodeId(dst))),
                "tx" => {
                    let amount: Amount = fields[3].parse().map_err(|_| bad("bad amount"))?;
                    if src == dst || amount.is_zero() {
                        return Err(bad("malformed transaction"));
                    }
                    transactions.push(Transaction::new(NodeId(src), NodeId(dst), amount));
                }
                _ => return Err(bad("unknown record kind")),
            }
        }
        Ok(Workload {
            edges,
            transactions,
        })
    }

    /// Largest node id referenced anywhere, if any.
    pub fn max_node_id(&self) -> Option<NodeId> {
        self.edges
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .chain(
                self.transactions
                    .iter()
                    .flat_map(|tx| [tx.sender, tx.receiver]),
            )
            .max()
    }
}

/// Grows a Barabási–Albert graph: `ba_m` isolated seed nodes, node `ba_m`
/// connects to all of them, and every later node attaches to `ba_m` distinct
/// existing nodes sampled proportionally to current degree (repeated-nodes
/// list, resampling duplicates). The result is connected and simple with
/// exactly `ba_m * (n_nodes - ba_m)` edges.
pub fn generate_topology<R: rand::Rng>(
    cfg: &WorkloadConfig,
    rng: &mut R,
) -> Vec<(NodeId, NodeId)> {
    let n = cfg.n_nodes;
    let m = cfg.ba_m;
    let mut edges: Vec<(NodeId, NodeId)> = Vec::with_capacity((m * (n - m)) as usize);
    // each node id appears once per unit of degree
    let mut endpoints: Vec<u32> = Vec::with_capacity(2 * edges.capacity());

    for target in 0..m {
        edges.push((NodeId(m), NodeId(target)));
        endpoints.push(m);
        endpoints.push(target);
    }
    let mut chosen: Vec<u32> = Vec::with_capacity(m as usize);
    for joiner in (m + 1)..n {
        chosen.clear();
        while (chosen.len() as u32) < m {
            let pick = endpoints[rng.random_range(0..endpoints.len())];
            if !chosen.contains(&pick) {
                chosen.push(pick);
            }
        }
        for &target in &chosen {
            edges.push((NodeId(joiner), NodeId(target)));
            endpoints.push(joiner);
            endpoints.push(target);
        }
    }
    edges
}

/// Draws `exp(Normal(mu, sigma))` currency units, rounded to the nearest
/// tick, floored at one tick.
pub fn sample_amount<R: rand::Rng>(cfg: &WorkloadConfig, rng: &mut R) -> Amount {
    let normal = Normal::new(cfg.lognormal_mu, cfg.lognormal_sigma).expect("validated sigma");
    amount_from_log(normal.sample(rng))
}

fn amount_from_log(z: f64) -> Amount {
    let ticks = (z.exp() * TICKS_PER_UNIT as f64).round();
    // `as` saturates; the floor keeps degenerate draws at one tick
    Amount::from_ticks((ticks as u64).max(1))
}

/// Sender uniform over all nodes, receiver uniform over the rest
/// (resampling the rare self-pair).
pub fn sample_pair<R: rand::Rng>(cfg: &WorkloadConfig, rng: &mut R) -> (NodeId, NodeId) {
    let sender = rng.random_range(0..cfg.n_nodes);
    let receiver = loop {
        let r = rng.random_range(0..cfg.n_nodes);
        if r != sender {
            break r;
        }
    };
    (NodeId(sender), NodeId(receiver))
}
