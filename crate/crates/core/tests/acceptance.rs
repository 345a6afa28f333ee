//! Acceptance suite. One test per criterion; each prints a single
//! `[acceptance] criterion N: PASS/FAIL` line (visible with
//! `cargo test --test acceptance -- --nocapture`).

mod common;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::time::Instant;

use common::random_instance;
use pcnsim_core::amount::{Amount, FeeRate, TICKS_PER_UNIT};
use pcnsim_core::fees::FeePolicy;
use pcnsim_core::ledger::NodeId;
use pcnsim_core::oracle::{check_lp_constraints, exhaustive_cheapest_path};
use pcnsim_core::report::Outcome;
use pcnsim_core::router::{cheapest_path, CapacityCheck};
use pcnsim_core::sim::{run, SimConfig};
use pcnsim_core::workload::{self, Workload, WorkloadConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

const INSTANCE_COUNT: u64 = 500;
const INSTANCE_SEED_BASE: u64 = 0xACCE_5500;

fn conclude(criterion: &str, ok: bool, detail: &str) {
    println!(
        "[acceptance] {criterion}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "{criterion} failed — {detail}");
}

fn full_scale(seed: u64) -> SimConfig {
    SimConfig {
        seed,
        ..SimConfig::default()
    }
}

fn both_policies() -> [FeePolicy; 2] {
    [
        FeePolicy::proportional(FeeRate::default()),
        FeePolicy::proportional_imbalance(FeeRate::default()),
    ]
}

/// Criterion 1: on 500 seeded random instances, the router's feasibility
/// verdict and optimal fee exactly match the exhaustive oracle, under both
/// fee policies, in under a minute.
#[test]
fn criterion_1_oracle_equivalence() {
    let started = Instant::now();
    let mut compared = 0u32;
    let mut routes = 0u32;
    for i in 0..INSTANCE_COUNT {
        let instance = random_instance(INSTANCE_SEED_BASE + i);
        let state = instance.state();
        for policy in both_policies() {
            let routed = cheapest_path(&state, &policy, CapacityCheck::Tight, &instance.tx);
            let oracle = exhaustive_cheapest_path(&state, &policy, CapacityCheck::Tight, &instance.tx)
                .expect("within oracle bounds");
            match (&routed, &oracle) {
                (None, None) => {}
                (Some(quote), Some((_, oracle_fee))) => {
                    assert_eq!(
                        quote.total_fee,
                        *oracle_fee,
                        "fee mismatch on instance {i}\ntx {:?}\n{}",
                        instance.tx,
                        state.dump()
                    );
                    routes += 1;
                }
                _ => panic!(
                    "verdict mismatch on instance {i}: router {routed:?} vs oracle {oracle:?}\n{}",
                    state.dump()
                ),
            }
            compared += 1;
        }
    }
    let elapsed = started.elapsed();
    conclude(
        "criterion 1 (oracle equivalence)",
        elapsed.as_secs() < 60,
        &format!(
            "{compared} router/oracle comparisons ({routes} with routes) agreed in {elapsed:.2?}"
        ),
    );
}

/// Criterion 2: every route from criterion 1 passes the preservation and
/// cut checks, and dropping any route edge's capacity below its recorded
/// flow produces at least one violated cut.
#[test]
fn criterion_2_lp_certification() {
    let mut certified = 0u32;
    let mut mutations = 0u32;
    for i in 0..INSTANCE_COUNT {
        let instance = random_instance(INSTANCE_SEED_BASE + i);
        let state = instance.state();
        for policy in both_policies() {
            let Some(quote) = cheapest_path(&state, &policy, CapacityCheck::Tight, &instance.tx)
            else {
                continue;
            };
            let report = check_lp_constraints(&state, &policy, &quote.path, &instance.tx)
                .expect("within cut-checker bounds");
            assert!(
                report.is_feasible(),
                "instance {i}: route has violated cuts {:?}\n{}",
                report.violated_cuts,
                state.dump()
            );
            certified += 1;

            for (hop, &flow) in quote.edge_flows.iter().enumerate() {
                let (from, to) = (quote.path[hop], quote.path[hop + 1]);
                let starved = instance.state_with_capacity(from, to, flow - Amount::from_ticks(1));
                let report = check_lp_constraints(&starved, &policy, &quote.path, &instance.tx)
                    .expect("within cut-checker bounds");
                assert!(
                    !report.violated_cuts.is_empty(),
                    "instance {i}: starving edge {from}->{to} below flow {flow} went undetected"
                );
                mutations += 1;
            }
        }
    }
    conclude(
        "criterion 2 (cut certification)",
        true,
        &format!("{certified} routes certified, {mutations} starved-edge mutations all detected"),
    );
}

/// Criterion 3: the full full-scale run conserves money exactly, audited
/// every 1000 transactions, within the runtime budget.
#[test]
fn criterion_3_conservation_at_scale() {
    let started = Instant::now();
    // run() fails fast on any failed audit; the final report re-checks
    let report = run(&full_scale(1)).expect("conservation audits clean");
    let elapsed = started.elapsed();
    conclude(
        "criterion 3 (conservation at scale)",
        report.totals.conservation_ok && elapsed.as_secs() < 300,
        &format!(
            "100000 transactions, every audit exact, {elapsed:.2?} (budget 300s)"
        ),
    );
}

/// Criterion 4: settlement statistics over three seeds at full scale.
#[test]
fn criterion_4_settlement_statistics() {
    let mut ok = true;
    let mut detail = String::new();
    for seed in [1u64, 2, 3] {
        let report = run(&full_scale(seed)).expect("run completes");
        let t = &report.totals;
        let n = f64::from(t.transactions);
        let route_found = f64::from(t.route_found) / n;
        let offchain = f64::from(t.routed_offchain) / n;
        let spend_cap = Amount::from_ticks(t.naive_onchain_cost.ticks() / 4);

        let band1 = route_found >= 0.97;
        let band2 = (0.95..=1.0).contains(&offchain);
        let band3 = (3.0..=5.0).contains(&t.mean_hops_routed);
        let band4 = t.transaction_phase_spend <= spend_cap;
        ok &= band1 && band2 && band3 && band4;
        write!(
            detail,
            "\n  seed {seed}: route_found {route_found:.4} (>=0.97 {}), \
             settled_offchain {offchain:.4} (in [0.95,1] {}), \
             mean_hops {:.3} (in [3,5] {}), \
             spend {} vs cap {} ({})",
            pf(band1),
            pf(band2),
            t.mean_hops_routed,
            pf(band3),
            t.transaction_phase_spend,
            spend_cap,
            pf(band4),
        )
        .unwrap();
    }
    conclude("criterion 4 (full-scale settlement statistics)", ok, &detail);
}

fn pf(ok: bool) -> &'static str {
    if ok { "ok" } else { "FAIL" }
}

/// Criterion 5: with the plain proportional policy, routed settlements obey
/// the break-even algebra exactly — no routed record violates
/// `amount * 0.005 * (hops - 1) <= 0.41`, no multi-hop route carries more
/// than 82 units, and among sub-27-unit transactions more than 99% have a
/// route.
#[test]
fn criterion_5_break_even_thresholds() {
    let cfg = SimConfig {
        fee_policy: FeePolicy::proportional(FeeRate::default()),
        ..full_scale(1)
    };
    let report = run(&cfg).expect("run completes");

    // amount * 0.005 * (hops-1) <= 0.41  <=>  amount_ticks * (hops-1) <= 820000
    let mut break_even_violations = 0u32;
    let mut multi_hop_over_82 = 0u32;
    let mut small = 0u64;
    let mut small_with_route = 0u64;
    for r in &report.records {
        if r.outcome == Outcome::Routed && r.hops >= 2 {
            if u128::from(r.amount.ticks()) * u128::from(r.hops - 1) > 820_000 {
                break_even_violations += 1;
            }
            if r.amount > Amount::from_units(82) {
                multi_hop_over_82 += 1;
            }
        }
        if r.amount < Amount::from_units(27) {
            small += 1;
            if r.route_exists() {
                small_with_route += 1;
            }
        }
    }
    let small_fraction = small_with_route as f64 / small as f64;
    let ok = break_even_violations == 0 && multi_hop_over_82 == 0 && small_fraction > 0.99;
    conclude(
        "criterion 5 (break-even thresholds)",
        ok,
        &format!(
            "{break_even_violations} break-even violations, {multi_hop_over_82} multi-hop routes \
             above 82 units, routed fraction among sub-27-unit amounts {small_fraction:.4} \
             ({small_with_route}/{small})"
        ),
    );
}

/// Criterion 6: node degree and earned routing fees are strongly rank
/// correlated at full scale.
#[test]
fn criterion_6_degree_earnings_correlation() {
    let report = run(&full_scale(1)).expect("run completes");
    let degrees: Vec<f64> = report.node_stats.iter().map(|s| f64::from(s.degree)).collect();
    let earned: Vec<f64> = report
        .node_stats
        .iter()
        .map(|s| s.earned_fees.ticks() as f64)
        .collect();
    let rho = spearman(&degrees, &earned);
    conclude(
        "criterion 6 (degree-earnings correlation)",
        rho > 0.5,
        &format!("Spearman rho {rho:.4} over {} nodes", degrees.len()),
    );
}

/// Criterion 7: identical config and seed produce byte-identical
/// transactions.csv and summary.json.
#[test]
fn criterion_7_determinism() {
    let cfg = full_scale(1);
    let dir = std::env::temp_dir().join(format!("pcnsim-accept-{}", std::process::id()));
    let (dir_a, dir_b) = (dir.join("a"), dir.join("b"));
    run(&cfg).expect("first run").emit(&dir_a).expect("emit");
    run(&cfg).expect("second run").emit(&dir_b).expect("emit");

    let mut ok = true;
    let mut detail = String::new();
    for file in ["transactions.csv", "summary.json"] {
        let a = std::fs::read(dir_a.join(file)).expect("read run A");
        let b = std::fs::read(dir_b.join(file)).expect("read run B");
        let same = a == b;
        ok &= same;
        write!(detail, "{file}: {} bytes, identical {same}; ", a.len()).unwrap();
    }
    std::fs::remove_dir_all(&dir).ok();
    conclude("criterion 7 (determinism)", ok, detail.trim_end_matches("; "));
}

/// Criterion 8: workload statistics — log-amount moments at 100k draws and
/// the exact topology shape at full scale.
#[test]
fn criterion_8_workload_statistics() {
    let cfg = WorkloadConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    let n = 100_000usize;
    let logs: Vec<f64> = (0..n)
        .map(|_| {
            let a = workload::sample_amount(&cfg, &mut rng);
            (a.ticks() as f64 / TICKS_PER_UNIT as f64).ln()
        })
        .collect();
    let mean = logs.iter().sum::<f64>() / n as f64;
    let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();

    let workload = Workload::generate(&cfg).expect("valid config");
    let edges = &workload.edges;
    let mut adjacency = vec![Vec::new(); cfg.n_nodes as usize];
    for &(a, b) in edges {
        adjacency[a.index()].push(b);
        adjacency[b.index()].push(a);
    }
    let mut seen = HashSet::from([NodeId(0)]);
    let mut stack = vec![NodeId(0)];
    while let Some(v) = stack.pop() {
        for &w in &adjacency[v.index()] {
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    let connected = seen.len() == cfg.n_nodes as usize;

    let ok = (mean - 2.95).abs() <= 0.05
        && (std - 1.2).abs() <= 0.05
        && edges.len() == 1996
        && connected;
    conclude(
        "criterion 8 (workload statistics)",
        ok,
        &format!(
            "log-amount mean {mean:.4} (target 2.95±0.05), std {std:.4} (target 1.2±0.05), \
             {} edges (want 1996), connected {connected}",
            edges.len()
        ),
    );
}

/// Spearman rank correlation with average ranks for ties.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    pearson(&rx, &ry)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // ranks are 1-based; ties share the mean rank of their block
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx).powi(2);
        vy += (b - my).powi(2);
    }
    cov / (vx * vy).sqrt()
}
