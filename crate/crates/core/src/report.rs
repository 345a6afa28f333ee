//! Per-transaction records, aggregate statistics and file output.
//!
//! All output files are plain CSV plus one JSON summary, written with fully
//! deterministic formatting: a given report serializes to byte-identical
//! files on every run.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::amount::Amount;
use crate::ledger::{NetworkState, NodeId};
use crate::sim::SimConfig;

/// How one transaction was settled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Settled off chain over a channel route.
    Routed,
    /// A route existed but was dearer than the on-chain fee; settled on chain.
    TooExpensive,
    /// No feasible route; settled on chain.
    NoRoute,
    /// Could not be settled at all.
    Failed,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Routed => "routed",
            Outcome::TooExpensive => "too_expensive",
            Outcome::NoRoute => "no_route",
            Outcome::Failed => "failed",
        }
    }

    fn index(self) -> usize {
        match self {
            Outcome::Routed => 0,
            Outcome::TooExpensive => 1,
            Outcome::NoRoute => 2,
            Outcome::Failed => 3,
        }
    }
}

/// One settled (or failed) transaction. `hops` and `total_fee` describe the
/// best route found, also for `TooExpensive` records where that route was
/// not taken; both are zero when no route existed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxRecord {
    pub id: u32,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub amount: Amount,
    pub outcome: Outcome,
    pub hops: u32,
    pub total_fee: Amount,
}

impl TxRecord {
    pub fn route_exists(&self) -> bool {
        matches!(self.outcome, Outcome::Routed | Outcome::TooExpensive)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeStat {
    pub node: NodeId,
    pub degree: u32,
    pub earned_fees: Amount,
    pub balance: Amount,
    pub wealth: Amount,
}

/// Amount bucket with per-outcome counts. `hi` is `None` for the open-ended
/// overflow bucket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmountBucket {
    pub lo: Amount,
    pub hi: Option<Amount>,
    pub counts: [u64; 4],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathLenBucket {
    pub hops: u32,
    pub routed: u64,
    pub too_expensive: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Totals {
    pub transactions: u32,
    pub routed_offchain: u32,
    pub onchain_too_expensive: u32,
    pub onchain_no_route: u32,
    pub failed_insufficient_funds: u32,
    /// Transactions for which a feasible route existed, whether or not it
    /// was taken (`routed_offchain + onchain_too_expensive`).
    pub route_found: u32,
    pub sum_routing_fees: Amount,
    pub chain_fees_bootstrap: Amount,
    pub chain_fees_transactions: Amount,
    /// Routing fees plus transaction-phase chain fees; excludes the channel
    /// bootstrap so the cost of moving the payments is visible on its own.
    pub transaction_phase_spend: Amount,
    /// What settling every transaction on chain would have cost.
    pub naive_onchain_cost: Amount,
    pub transferred_volume: Amount,
    pub mean_hops_routed: f64,
    pub initial_funds: Amount,
    pub conservation_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub config: SimConfig,
    pub records: Vec<TxRecord>,
    pub node_stats: Vec<NodeStat>,
    pub amount_histogram: Vec<AmountBucket>,
    pub pathlen_histogram: Vec<PathLenBucket>,
    pub totals: Totals,
}

impl SimReport {
    pub(crate) fn build(
        config: SimConfig,
        records: Vec<TxRecord>,
        state: &NetworkState,
        chain_fees_bootstrap: Amount,
    ) -> SimReport {
        let mut counts = [0u32; 4];
        let mut sum_routing_fees = Amount::ZERO;
        let mut transferred_volume = Amount::ZERO;
        let mut routed_hops: u64 = 0;
        for record in &records {
            counts[record.outcome.index()] += 1;
            match record.outcome {
                Outcome::Routed => {
                    sum_routing_fees += record.total_fee;
                    routed_hops += u64::from(record.hops);
                    transferred_volume += record.amount;
                }
                Outcome::TooExpensive | Outcome::NoRoute => {
                    transferred_volume += record.amount;
                }
                Outcome::Failed => {}
            }
        }
        let chain_fees_transactions = state.burned() - chain_fees_bootstrap;
        let naive_onchain_cost = Amount::from_ticks(
            state.chain_fee().ticks() * records.len() as u64,
        );
        let mean_hops_routed = if counts[0] > 0 {
            routed_hops as f64 / f64::from(counts[0])
        } else {
            0.0
        };
        let totals = Totals {
            transactions: records.len() as u32,
            routed_offchain: counts[0],
            onchain_too_expensive: counts[1],
            onchain_no_route: counts[2],
            failed_insufficient_funds: counts[3],
            route_found: counts[0] + counts[1],
            sum_routing_fees,
            chain_fees_bootstrap,
            chain_fees_transactions,
            transaction_phase_spend: sum_routing_fees + chain_fees_transactions,
            naive_onchain_cost,
            transferred_volume,
            mean_hops_routed,
            initial_funds: state.initial_funds(),
            conservation_ok: state.conservation_holds(),
        };

        let node_stats = state
            .node_ids()
            .map(|node| NodeStat {
                node,
                degree: state.degree(node),
                earned_fees: state.earned_fees(node),
                balance: state.balance(node),
                wealth: state.wealth(node),
            })
            .collect();

        SimReport {
            amount_histogram: amount_histogram(&records),
            pathlen_histogram: pathlen_histogram(&records),
            config,
            records,
            node_stats,
            totals,
        }
    }

    /// Writes `transactions.csv`, `amount_histogram.csv`,
    /// `pathlen_histogram.csv`, `node_stats.csv` and `summary.json` into
    /// `out_dir`, creating it if needed.
    pub fn emit(&self, out_dir: &Path) -> Result<(), EmitError> {
        let ctx = |path: &Path| {
            let path = path.to_path_buf();
            move |source: io::Error| EmitError { path, source }
        };
        fs::create_dir_all(out_dir).map_err(ctx(out_dir))?;

        let path = out_dir.join("transactions.csv");
        let mut w = writer(&path)?;
        (|| -> io::Result<()> {
            writeln!(w, "id,sender,receiver,amount,outcome,hops,total_fee")?;
            for r in &self.records {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    r.id,
                    r.sender,
                    r.receiver,
                    r.amount,
                    r.outcome.as_str(),
                    r.hops,
                    r.total_fee
                )?;
            }
            w.flush()
        })()
        .map_err(ctx(&path))?;

        let path = out_dir.join("amount_histogram.csv");
        let mut w = writer(&path)?;
        (|| -> io::Result<()> {
            writeln!(w, "bin_lo,bin_hi,routed,too_expensive,no_route,failed")?;
            for bucket in &self.amount_histogram {
                let hi = match bucket.hi {
                    Some(hi) => hi.to_string(),
                    None => "inf".to_string(),
                };
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    bucket.lo,
                    hi,
                    bucket.counts[0],
                    bucket.counts[1],
                    bucket.counts[2],
                    bucket.counts[3]
                )?;
            }
            w.flush()
        })()
        .map_err(ctx(&path))?;

        let path = out_dir.join("pathlen_histogram.csv");
        let mut w = writer(&path)?;
        (|| -> io::Result<()> {
            writeln!(w, "hops,routed,too_expensive")?;
            for bucket in &self.pathlen_histogram {
                writeln!(w, "{},{},{}", bucket.hops, bucket.routed, bucket.too_expensive)?;
            }
            w.flush()
        })()
        .map_err(ctx(&path))?;

        let path = out_dir.join("node_stats.csv");
        let mut w = writer(&path)?;
        (|| -> io::Result<()> {
            writeln!(w, "node,degree,earned_fees,balance,wealth")?;
            for s in &self.node_stats {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    s.node, s.degree, s.earned_fees, s.balance, s.wealth
                )?;
            }
            w.flush()
        })()
        .map_err(ctx(&path))?;

        let path = out_dir.join("summary.json");
        let mut w = writer(&path)?;
        (|| -> io::Result<()> {
            #[derive(Serialize)]
            struct Summary<'a> {
                config: &'a SimConfig,
                totals: &'a Totals,
            }
            serde_json::to_writer_pretty(
                &mut w,
                &Summary {
                    config: &self.config,
                    totals: &self.totals,
                },
            )?;
            writeln!(w)?;
            w.flush()
        })()
        .map_err(ctx(&path))?;

        Ok(())
    }
}

#[derive(Debug, Error)]
#[error("{path}: {source}")]
pub struct EmitError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

fn writer(path: &Path) -> Result<BufWriter<fs::File>, EmitError> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|source| EmitError {
            path: path.to_path_buf(),
            source,
        })
}

/// Bucket edges at `10^(k/8)` units for `k in -16..=32`, expressed as exact
/// tick thresholds (`ceil`), covering 0.01 through 10000 units with one
/// underflow and one overflow bucket at the ends.
fn bucket_edges() -> Vec<u64> {
    (-16i32..=32)
        .map(|k| {
            let j = k + 32; // 10^(j/8) ticks
            if j % 8 == 0 {
                10u64.pow((j / 8) as u32)
            } else {
                10f64.powf(f64::from(j) / 8.0).ceil() as u64
            }
        })
        .collect()
}

fn amount_histogram(records: &[TxRecord]) -> Vec<AmountBucket> {
    let edges = bucket_edges();
    let mut buckets: Vec<AmountBucket> = Vec::with_capacity(edges.len() + 1);
    buckets.push(AmountBucket {
        lo: Amount::from_ticks(1),
        hi: Some(Amount::from_ticks(edges[0])),
        counts: [0; 4],
    });
    for w in edges.windows(2) {
        buckets.push(AmountBucket {
            lo: Amount::from_ticks(w[0]),
            hi: Some(Amount::from_ticks(w[1])),
            counts: [0; 4],
        });
    }
    buckets.push(AmountBucket {
        lo: Amount::from_ticks(*edges.last().unwrap()),
        hi: None,
        counts: [0; 4],
    });
    for record in records {
        let idx = edges.partition_point(|&e| e <= record.amount.ticks());
        buckets[idx].counts[record.outcome.index()] += 1;
    }
    buckets
}

fn pathlen_histogram(records: &[TxRecord]) -> Vec<PathLenBucket> {
    let max_hops = records
        .iter()
        .filter(|r| r.route_exists())
        .map(|r| r.hops)
        .max()
        .unwrap_or(0);
    let mut buckets: Vec<PathLenBucket> = (1..=max_hops)
        .map(|hops| PathLenBucket {
            hops,
            routed: 0,
            too_expensive: 0,
        })
        .collect();
    for record in records {
        let idx = match record.outcome {
            Outcome::Routed => 0,
            Outcome::TooExpensive => 1,
            _ => continue,
        };
        let bucket = &mut buckets[record.hops as usize - 1];
        match idx {
            0 => bucket.routed += 1,
            _ => bucket.too_expensive += 1,
        }
    }
    buckets
}
