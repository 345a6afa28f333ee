//! `pcnsim` — batch driver for the payment channel network simulator.
//!
//! Settings resolve in three layers: built-in defaults, then an optional
//! `key = value` config file, then command-line flags. The run writes CSV
//! reports plus a JSON summary into the output directory; identical settings
//! and seed produce byte-identical outputs.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use pcnsim_core::amount::{Amount, FeeRate};
use pcnsim_core::fees::FeePolicy;
use pcnsim_core::router::CapacityCheck;
use pcnsim_core::sim::{run_with_workload, SimConfig};
use pcnsim_core::workload::Workload;

#[derive(Debug, Parser)]
#[command(
    name = "pcnsim",
    version,
    about = "Payment channel network simulator",
    after_help = "Config file: one `key = value` per line, '#' starts a comment; \
                  keys match the long flag names (e.g. `nodes = 1000`). Flags win."
)]
struct Cli {
    /// Read settings from a config file; flags override it
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Number of nodes
    #[arg(long, value_name = "N")]
    nodes: Option<u32>,

    /// Number of transactions
    #[arg(long, value_name = "N")]
    transactions: Option<u32>,

    /// Attachment count of the scale-free topology
    #[arg(long, value_name = "M")]
    ba_m: Option<u32>,

    /// Channel funding per side, in currency units
    #[arg(long, value_name = "AMOUNT")]
    funding: Option<Amount>,

    /// Initial on-chain balance per node
    #[arg(long, value_name = "AMOUNT")]
    initial_balance: Option<Amount>,

    /// Constant fee per on-chain interaction
    #[arg(long, value_name = "AMOUNT")]
    chain_fee: Option<Amount>,

    /// Proportional fee rate, decimal or fraction (0.005 or 1/200)
    #[arg(long, value_name = "RATE")]
    fee_rate: Option<FeeRate>,

    /// Per-hop fee for the flat policy
    #[arg(long, value_name = "AMOUNT")]
    flat_fee: Option<Amount>,

    /// Fee policy
    #[arg(long, value_enum, value_name = "POLICY")]
    fee_policy: Option<PolicyKind>,

    /// Use the conservative capacity check that also reserves the crossing
    /// edge's fee
    #[arg(long)]
    paper_literal_check: bool,

    /// Log-space mean of the amount distribution
    #[arg(long, value_name = "F")]
    mu: Option<f64>,

    /// Log-space standard deviation of the amount distribution
    #[arg(long, value_name = "F")]
    sigma: Option<f64>,

    /// RNG seed
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Replay a workload CSV instead of generating one
    #[arg(long, value_name = "FILE")]
    workload_in: Option<PathBuf>,

    /// Write the generated (or replayed) workload as CSV
    #[arg(long, value_name = "FILE")]
    workload_out: Option<PathBuf>,

    /// Also write the final ledger state as state_dump.txt
    #[arg(long)]
    dump_state: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyKind {
    Flat,
    Proportional,
    Imbalance,
}

/// One layer of settings; `None` means "not set at this layer".
#[derive(Debug, Default)]
struct Overrides {
    nodes: Option<u32>,
    transactions: Option<u32>,
    ba_m: Option<u32>,
    funding: Option<Amount>,
    initial_balance: Option<Amount>,
    chain_fee: Option<Amount>,
    fee_rate: Option<FeeRate>,
    flat_fee: Option<Amount>,
    fee_policy: Option<PolicyKind>,
    paper_literal_check: Option<bool>,
    mu: Option<f64>,
    sigma: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workload_in: Option<PathBuf>,
    workload_out: Option<PathBuf>,
    dump_state: Option<bool>,
}

impl Overrides {
    fn merge(&mut self, layer: Overrides) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if layer.$field.is_some() { self.$field = layer.$field; })*
            };
        }
        take!(
            nodes,
            transactions,
            ba_m,
            funding,
            initial_balance,
            chain_fee,
            fee_rate,
            flat_fee,
            fee_policy,
            paper_literal_check,
            mu,
            sigma,
            seed,
            out,
            workload_in,
            workload_out,
            dump_state
        );
    }
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            nodes: self.nodes,
            transactions: self.transactions,
            ba_m: self.ba_m,
            funding: self.funding,
            initial_balance: self.initial_balance,
            chain_fee: self.chain_fee,
            fee_rate: self.fee_rate,
            flat_fee: self.flat_fee,
            fee_policy: self.fee_policy,
            // presence-only flags never reset a config-file `true`
            paper_literal_check: self.paper_literal_check.then_some(true),
            mu: self.mu,
            sigma: self.sigma,
            seed: self.seed,
            out: self.out.clone(),
            workload_in: self.workload_in.clone(),
            workload_out: self.workload_out.clone(),
            dump_state: self.dump_state.then_some(true),
        }
    }
}

struct RunPlan {
    config: SimConfig,
    out: PathBuf,
    workload_in: Option<PathBuf>,
    workload_out: Option<PathBuf>,
    dump_state: bool,
}

fn resolve(settings: Overrides) -> RunPlan {
    let defaults = SimConfig::default();
    let rate = settings.fee_rate.unwrap_or_default();
    let fee_policy = match settings.fee_policy.unwrap_or(PolicyKind::Imbalance) {
        PolicyKind::Flat => FeePolicy::flat(settings.flat_fee.unwrap_or(Amount::ZERO)),
        PolicyKind::Proportional => FeePolicy::proportional(rate),
        PolicyKind::Imbalance => FeePolicy::proportional_imbalance(rate),
    };
    let capacity_check = if settings.paper_literal_check.unwrap_or(false) {
        CapacityCheck::PaperLiteral
    } else {
        CapacityCheck::Tight
    };
    RunPlan {
        config: SimConfig {
            n_nodes: settings.nodes.unwrap_or(defaults.n_nodes),
            n_transactions: settings.transactions.unwrap_or(defaults.n_transactions),
            ba_m: settings.ba_m.unwrap_or(defaults.ba_m),
            channel_funding_per_side: settings
                .funding
                .unwrap_or(defaults.channel_funding_per_side),
            initial_balance: settings.initial_balance.unwrap_or(defaults.initial_balance),
            chain_fee: settings.chain_fee.unwrap_or(defaults.chain_fee),
            fee_policy,
            capacity_check,
            lognormal_mu: settings.mu.unwrap_or(defaults.lognormal_mu),
            lognormal_sigma: settings.sigma.unwrap_or(defaults.lognormal_sigma),
            seed: settings.seed.unwrap_or(defaults.seed),
        },
        out: settings.out.unwrap_or_else(|| PathBuf::from("out")),
        workload_in: settings.workload_in,
        workload_out: settings.workload_out,
        dump_state: settings.dump_state.unwrap_or(false),
    }
}

fn parse_config_file(path: &Path) -> Result<Overrides> {
    let content = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut overrides = Overrides::default();
    for (idx, raw) in content.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = || format!("{}:{}", path.display(), idx + 1);
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}: expected `key = value`, got `{raw}`", at());
        };
        let (key, value) = (key.trim(), value.trim());
        let ctx = || format!("{}: invalid value `{value}` for `{key}`", at());
        match key {
            "nodes" => overrides.nodes = Some(value.parse().with_context(ctx)?),
            "transactions" => overrides.transactions = Some(value.parse().with_context(ctx)?),
            "ba-m" => overrides.ba_m = Some(value.parse().with_context(ctx)?),
            "funding" => overrides.funding = Some(value.parse().with_context(ctx)?),
            "initial-balance" => {
                overrides.initial_balance = Some(value.parse().with_context(ctx)?)
            }
            "chain-fee" => overrides.chain_fee = Some(value.parse().with_context(ctx)?),
            "fee-rate" => overrides.fee_rate = Some(value.parse().with_context(ctx)?),
            "flat-fee" => overrides.flat_fee = Some(value.parse().with_context(ctx)?),
            "fee-policy" => {
                overrides.fee_policy =
                    Some(PolicyKind::from_str(value, true).map_err(|e| {
                        anyhow::anyhow!("{}: invalid value `{value}` for `{key}`: {e}", at())
                    })?)
            }
            "paper-literal-check" => {
                overrides.paper_literal_check = Some(parse_bool(value).with_context(ctx)?)
            }
            "mu" => overrides.mu = Some(value.parse().with_context(ctx)?),
            "sigma" => overrides.sigma = Some(value.parse().with_context(ctx)?),
            "seed" => overrides.seed = Some(value.parse().with_context(ctx)?),
            "out" => overrides.out = Some(PathBuf::from(value)),
            "workload-in" => overrides.workload_in = Some(PathBuf::from(value)),
            "workload-out" => overrides.workload_out = Some(PathBuf::from(value)),
            "dump-state" => overrides.dump_state = Some(parse_bool(value).with_context(ctx)?),
            _ => bail!("{}: unknown config key `{key}`", at()),
        }
    }
    Ok(overrides)
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => bail!("expected `true` or `false`"),
    }
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    let mut settings = Overrides::default();
    if let Some(path) = &cli.config {
        settings.merge(parse_config_file(path)?);
    }
    settings.merge(cli.overrides());
    let plan = resolve(settings);
    let mut config = plan.config;

    let workload = match &plan.workload_in {
        Some(path) => {
            let file = fs::File::open(path)
                .with_context(|| format!("cannot open workload {}", path.display()))?;
            let workload = Workload::read_csv(BufReader::new(file))
                .with_context(|| format!("cannot parse workload {}", path.display()))?;
            // the replayed stream defines the experiment length
            config.n_transactions = workload.transactions.len() as u32;
            workload
        }
        None => Workload::generate(&config.workload())?,
    };
    if let Some(path) = &plan.workload_out {
        let file = fs::File::create(path)
            .with_context(|| format!("cannot create workload file {}", path.display()))?;
        workload
            .write_csv(BufWriter::new(file))
            .with_context(|| format!("cannot write workload {}", path.display()))?;
    }

    let (report, state) = run_with_workload(&config, &workload)?;
    report.emit(&plan.out)?;
    if plan.dump_state {
        let path = plan.out.join("state_dump.txt");
        fs::write(&path, state.dump())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }

    let t = &report.totals;
    println!(
        "network: {} nodes, {} channels, seed {}",
        config.n_nodes,
        state.num_channels(),
        config.seed
    );
    println!(
        "settled: {} routed off-chain, {} too expensive, {} no route, {} failed (of {})",
        t.routed_offchain,
        t.onchain_too_expensive,
        t.onchain_no_route,
        t.failed_insufficient_funds,
        t.transactions
    );
    println!(
        "spend: {} routing fees + {} transaction chain fees (bootstrap {}), naive on-chain {}",
        t.sum_routing_fees, t.chain_fees_transactions, t.chain_fees_bootstrap, t.naive_onchain_cost
    );
    println!(
        "volume: {} transferred, mean routed hops {:.3}, conservation {}",
        t.transferred_volume,
        t.mean_hops_routed,
        if t.conservation_ok { "exact" } else { "VIOLATED" }
    );
    println!("reports: {}", plan.out.display());
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
