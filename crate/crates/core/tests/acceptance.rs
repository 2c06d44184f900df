//! One PASS/FAIL line per acceptance criterion.
//!
//! The target is a report: it exits successfully whatever the outcome so the
//! rest of the workspace suite still runs. Set `HYBRIDCHAIN_ACCEPTANCE_STRICT`
//! to exit non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hybridchain::chain::TxRejection;
use hybridchain::consensus::{quorum, transition, ConsensusPhase, PhaseAutomaton, PhaseEvent};
use hybridchain::crypto::{sha256, KeyPair};
use hybridchain::master::{plan_round, round_seed, SelectionConfig, ValidatorRegistry};
use hybridchain::metrics::{
    five_number_summary, median, parse_csv, pct_change, pearson, pearson_matrix, spearman, to_csv_string, Correlation,
    RoundMetrics,
};
use hybridchain::sim::{run_simulation, HarnessConfig, RunOutput, SchedulerMode};
use hybridchain::transport::{connection_count, first_crossover, p2p_edge_count, TopologyParams};
use hybridchain::workload::FraudSchedule;
use hybridchain::NodeId;

const ROUNDS: u64 = 130;
const BLOCK: usize = 512;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn seeded(cfg: &HarnessConfig) -> RunOutput {
    run_simulation(cfg, SchedulerMode::Seeded).unwrap_or_else(|e| panic!("simulation failed: {e}"))
}

fn col(rows: &[RoundMetrics], f: fn(&RoundMetrics) -> f64) -> Vec<f64> {
    rows.iter().map(f).collect()
}

fn scaled_runs() -> Vec<(usize, RunOutput)> {
    [1usize, 3, 4]
        .into_iter()
        .map(|nodes| {
            let cfg = HarnessConfig {
                nodes,
                rounds: ROUNDS,
                fraud_schedule: FraudSchedule::constant(0.5),
                rng_seed: 7,
                ..HarnessConfig::default()
            };
            let t = Instant::now();
            let out = seeded(&cfg);
            eprintln!("  ran {nodes}-node deployment, {ROUNDS} rounds, in {:.1?}", t.elapsed());
            (nodes, out)
        })
        .collect()
}

fn c1_safety(runs: &[(usize, RunOutput)]) -> Outcome {
    let mut problems = Vec::new();
    for (n, out) in runs {
        if out.halted() {
            problems.push(format!("{n} nodes: halted"));
        }
        if out.rows.len() as u64 != ROUNDS {
            problems.push(format!("{n} nodes: {} rows", out.rows.len()));
        }
        for node in &out.nodes {
            if node.chain.len() as u64 != ROUNDS {
                problems.push(format!("{n} nodes: {} holds {} blocks", node.node_id, node.chain.len()));
            }
        }
        problems.extend(out.chain_divergence().into_iter().map(|d| format!("{n} nodes: {d}")));
        problems.extend(out.invalid_committed().into_iter().map(|d| format!("{n} nodes: {d}")));
    }
    let detail = if problems.is_empty() {
        format!("nodes 1/3/4, {ROUNDS} blocks x {BLOCK} txs, chains identical, 0 invalid txs")
    } else {
        problems.join("; ")
    };
    outcome(problems.is_empty(), detail)
}

fn c2_fraud_exclusion() -> Outcome {
    let cfg = HarnessConfig {
        nodes: 3,
        rounds: 20,
        fraud_schedule: FraudSchedule::constant(3.0),
        rng_seed: 21,
        ..HarnessConfig::default()
    };
    let out = seeded(&cfg);
    let mut problems = Vec::new();
    let committed: usize = out.nodes[0].chain.iter().map(|b| b.transactions.len()).sum();
    let valid_sent: u64 = out.injections.rounds.iter().map(|r| r.valid_sent).sum();
    for b in &out.nodes[0].chain {
        if b.transactions.len() != BLOCK {
            problems.push(format!("height {} holds {} txs", b.header.height, b.transactions.len()));
        }
    }
    if committed as u64 != valid_sent {
        problems.push(format!("committed {committed} txs, valid sent {valid_sent}"));
    }
    problems.extend(out.invalid_committed());
    problems.extend(out.chain_divergence());
    for inj in &out.injections.rounds {
        let expected: BTreeMap<TxRejection, u64> =
            inj.fraud_kinds.iter().filter(|(_, c)| **c > 0).map(|(k, c)| (k.rejection(), *c)).collect();
        for node in &out.nodes {
            let got: BTreeMap<TxRejection, u64> = node
                .rejects_by_round
                .get(&inj.round)
                .cloned()
                .unwrap_or_default()
                .into_iter()
                .filter(|(_, c)| *c > 0)
                .collect();
            if got != expected {
                problems.push(format!("{} round {}: rejects {got:?} vs injected {expected:?}", node.node_id, inj.round));
            }
        }
    }
    let fraud = out.injections.total_fraud();
    let detail = if problems.is_empty() {
        format!("20 rounds at ratio 3: {fraud} frauds injected, all rejected per kind (diff 0), every block {BLOCK} valid txs")
    } else {
        problems.into_iter().take(5).collect::<Vec<_>>().join("; ")
    };
    outcome(detail.starts_with("20 rounds"), detail)
}

fn c3_ttf_fraud() -> Outcome {
    let rounds = 60;
    let cfg = HarnessConfig {
        nodes: 3,
        rounds,
        fraud_schedule: FraudSchedule::doubling(0.125, 10, rounds),
        rng_seed: 33,
        ..HarnessConfig::default()
    };
    let out = seeded(&cfg);
    let failed = col(&out.rows, |r| r.failed_tx as f64);
    let r_ttf = pearson(&col(&out.rows, |r| r.ttf_ms), &failed);
    let r_tps = pearson(&col(&out.rows, |r| r.block_tps), &failed);
    let pass = out.rows.len() as u64 == rounds && r_ttf.is_some_and(|r| r >= 0.95) && r_tps.is_some_and(|r| r < 0.0);
    outcome(
        pass,
        format!(
            "fraud ratio 0.125 doubling every 10 rounds to 4: r(ttf, failed) = {} (need >= 0.95), r(block_tps, failed) = {} (need < 0)",
            fmt_opt(r_ttf),
            fmt_opt(r_tps)
        ),
    )
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |x| format!("{x:.4}"))
}

fn c4_throughput_identity(runs: &[(usize, RunOutput)]) -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for (n, out) in runs {
        let text = to_csv_string(&out.rows);
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            let consensus: f64 = fields[6].parse().unwrap();
            let expected = format!("{:.6}", BLOCK as f64 * 1000.0 / consensus);
            if fields[11] != expected {
                bad.push(format!("{n} nodes round {}: {} vs {expected}", fields[0], fields[11]));
            }
            checked += 1;
        }
        if parse_csv(&text).map(|r| r.len()).ok() != Some(out.rows.len()) {
            bad.push(format!("{n} nodes: CSV does not round-trip"));
        }
    }
    let spot: f64 = 512.0 / 0.49628;
    let rel = (spot - 1031.83).abs() / 1031.83;
    let pass = bad.is_empty() && rel <= 0.001;
    outcome(
        pass,
        if bad.is_empty() {
            format!(
                "{checked} rows satisfy block_tps = 512000/consensus_ms at 6 decimals; 512/0.49628 s = {spot:.2} vs reported median 1031.83 ({:.3}% off)",
                rel * 100.0
            )
        } else {
            bad.into_iter().take(5).collect::<Vec<_>>().join("; ")
        },
    )
}

fn c5_scaling(runs: &[(usize, RunOutput)]) -> Outcome {
    let medians: Vec<(usize, f64)> = runs
        .iter()
        .map(|(n, o)| (*n, median(&col(&o.rows, |r| r.block_tps)).unwrap()))
        .collect();
    let reference = [-1.83, -1.10];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, pair) in medians.windows(2).enumerate() {
        let d = pct_change(pair[0].1, pair[1].1).unwrap();
        pass &= d.abs() <= 10.0;
        parts.push(format!("{}->{} nodes {d:+.2}% (reported {:+.2}%)", pair[0].0, pair[1].0, reference[i]));
    }
    let meds: Vec<String> = medians.iter().map(|(n, m)| format!("{n}:{m:.1}")).collect();
    outcome(pass, format!("median block_tps {}; {}; bound |d| <= 10%", meds.join(" "), parts.join(", ")))
}

fn c6_stationarity(runs: &[(usize, RunOutput)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, out) in runs {
        let idx: Vec<f64> = out.rows.iter().map(|r| r.round as f64).collect();
        let rho = spearman(&col(&out.rows, |r| r.block_tps), &idx);
        pass &= rho.is_some_and(|r| r.abs() <= 0.2);
        parts.push(format!("{n} nodes rho = {}", fmt_opt(rho)));
    }
    outcome(pass, format!("constant fraud 0.5 over {ROUNDS} rounds: {} (need |rho| <= 0.2)", parts.join(", ")))
}

fn registry(stakes: &[u64]) -> ValidatorRegistry {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut reg = ValidatorRegistry::new();
    for (i, s) in stakes.iter().enumerate() {
        reg.register_validator(NodeId(i as u32), KeyPair::generate(&mut rng).public_key(), *s)
            .unwrap();
    }
    reg
}

fn selection_counts(stakes: &[u64], draws: u64) -> (BTreeMap<NodeId, u64>, BTreeSet<NodeId>) {
    let mut reg = registry(stakes);
    let denied = reg.enforce_stake_cap(0.5);
    let config = SelectionConfig {
        validators_per_round: 1,
        stake_cap_fraction: 0.5,
        seed_base: b"fairness".to_vec(),
    };
    let proposals: BTreeMap<NodeId, u64> = stakes.iter().enumerate().map(|(i, s)| (NodeId(i as u32), *s)).collect();
    let mut counts = BTreeMap::new();
    for s in 0..draws {
        let seed = round_seed(&config.seed_base, 1, &sha256(&s.to_le_bytes()), 0);
        let (_, sel) = plan_round(&reg, &proposals, &config, 1, &seed).unwrap();
        for id in sel {
            *counts.entry(id).or_insert(0) += 1;
        }
    }
    (counts, denied)
}

fn c7_fairness() -> Outcome {
    let draws = 10_000;
    let (counts, _) = selection_counts(&[1, 1, 2], draws);
    let heavy = counts.get(&NodeId(2)).copied().unwrap_or(0) as f64 / draws as f64 * 100.0;
    let (capped, denied) = selection_counts(&[1, 1, 3], draws);
    let capped_hits = capped.get(&NodeId(2)).copied().unwrap_or(0);
    let pass = (heavy - 50.0).abs() <= 3.0 && denied.contains(&NodeId(2)) && capped_hits == 0;
    outcome(
        pass,
        format!(
            "stakes 1,1,2 k=1: heaviest chosen {heavy:.2}% of {draws} (need 50 +/- 3); stakes 1,1,3 cap 0.5: share-0.6 node chosen {capped_hits} times"
        ),
    )
}

const EVENTS: [PhaseEvent; 10] = [
    PhaseEvent::Start,
    PhaseEvent::BlockReady,
    PhaseEvent::Selected,
    PhaseEvent::NotSelected,
    PhaseEvent::PrePrepare,
    PhaseEvent::PrepareVote,
    PhaseEvent::CommitVote,
    PhaseEvent::Adopt,
    PhaseEvent::NextRound,
    PhaseEvent::Abort,
];

/// The legal edges written out as a table, independent of `transition`.
fn legal_edges() -> BTreeSet<(u8, u8, u8)> {
    use ConsensusPhase as P;
    use PhaseEvent as E;
    let p = |x: P| x as u8;
    let e = |x: E| x as u8;
    let mut s = BTreeSet::new();
    for (from, ev, to) in [
        (P::Idle, E::Start, P::Pooling),
        (P::Pooling, E::BlockReady, P::StakeProposed),
        (P::StakeProposed, E::Selected, P::Selected),
        (P::StakeProposed, E::NotSelected, P::Pooling),
        (P::Selected, E::PrePrepare, P::PrePrepared),
        (P::PrePrepared, E::PrepareVote, P::Prepared),
        (P::Prepared, E::CommitVote, P::Committed),
        (P::Pooling, E::Adopt, P::Committed),
        (P::Committed, E::NextRound, P::Pooling),
    ] {
        s.insert((p(from), e(ev), p(to)));
    }
    for from in [
        P::Pooling,
        P::StakeProposed,
        P::Selected,
        P::PrePrepared,
        P::Prepared,
        P::Committed,
    ] {
        s.insert((p(from), e(E::Abort), p(P::Pooling)));
    }
    s
}

fn c8_quorum_automaton() -> Outcome {
    let quorum_ok = (1..=100usize).all(|k| quorum(k) == (2 * k) / 3 + 1 && quorum(k) <= k);
    let edges = legal_edges();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0u64;
    let mut accepted = 0u64;
    let sequences = 100_000;
    for _ in 0..sequences {
        let mut a = PhaseAutomaton::new();
        let len = rng.gen_range(1..40);
        for _ in 0..len {
            // Bias toward the happy path so deep states are reached.
            let ev = if rng.gen_bool(0.5) {
                let legal: Vec<PhaseEvent> = EVENTS.iter().copied().filter(|e| transition(a.current(), *e).is_some()).collect();
                legal[rng.gen_range(0..legal.len())]
            } else {
                EVENTS[rng.gen_range(0..EVENTS.len())]
            };
            let before = a.current();
            let expected = edges
                .iter()
                .find(|(f, e, _)| *f == before as u8 && *e == ev as u8)
                .map(|(_, _, t)| *t);
            match (a.step(ev), expected) {
                (Ok(next), Some(t)) if next as u8 == t => accepted += 1,
                (Err(_), None) if a.current() == before => {}
                _ => violations += 1,
            }
        }
    }
    outcome(
        quorum_ok && violations == 0,
        format!(
            "quorum(k) = floor(2k/3)+1 for k=1..100: {}; {sequences} fuzzed sequences, {accepted} legal steps, {violations} illegal states",
            if quorum_ok { "ok" } else { "mismatch" }
        ),
    )
}

fn c9_topology() -> Outcome {
    let mut mismatches = 0;
    for n in 1..=1000u64 {
        let mesh: u64 = (0..n).sum();
        if p2p_edge_count(n) != mesh {
            mismatches += 1;
        }
        if connection_count(TopologyParams { n, b: 3 }) != 3 * n {
            mismatches += 1;
        }
    }
    let cross = first_crossover(3, 1000);
    outcome(
        mismatches == 0 && cross == Some(8),
        format!(
            "n=1..1000 closed forms: {mismatches} mismatches; first crossover with 3 brokers at n = {} (24 broker links vs 28 mesh edges); brokered growth is linear in n while the mesh grows quadratically",
            cross.map_or("none".into(), |n| n.to_string())
        ),
    )
}

fn oracle_quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = p * (v.len() as f64 - 1.0);
    let below = pos as usize;
    let frac = pos - below as f64;
    if below + 1 >= v.len() {
        v[below]
    } else {
        v[below] * (1.0 - frac) + v[below + 1] * frac
    }
}

fn oracle_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

fn c10_stats() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    let mut flag_errors = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..200);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1e3..1e3)).collect();
        let s = five_number_summary(&xs).unwrap();
        for (got, p) in [(s.min, 0.0), (s.q1, 0.25), (s.median, 0.5), (s.q3, 0.75), (s.max, 1.0)] {
            worst = worst.max((got - oracle_quantile(&xs, p)).abs());
        }
        let rows = rng.gen_range(2..60);
        let cols = rng.gen_range(1..6);
        let mut columns: Vec<Vec<f64>> = (0..cols)
            .map(|_| (0..rows).map(|_| rng.gen_range(-50.0..50.0)).collect())
            .collect();
        if rng.gen_bool(0.1) {
            columns[0] = vec![4.0; rows];
        }
        let m = pearson_matrix(&columns).unwrap();
        for i in 0..cols {
            for j in 0..cols {
                match (m.get(i, j), oracle_pearson(&columns[i], &columns[j])) {
                    (Correlation::Defined(a), Some(b)) => worst = worst.max((a - b).abs()),
                    (Correlation::Undefined, None) => {}
                    _ => flag_errors += 1,
                }
            }
        }
    }
    outcome(
        worst <= 1e-9 && flag_errors == 0,
        format!("1000 random inputs: max abs error {worst:.3e} (need <= 1e-9), {flag_errors} undefined-flag mismatches"),
    )
}

fn main() -> ExitCode {
    let t = Instant::now();
    let runs = scaled_runs();
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "safety", c1_safety(&runs)),
        (2, "fraud exclusion", c2_fraud_exclusion()),
        (3, "ttf-fraud coupling", c3_ttf_fraud()),
        (4, "throughput identity", c4_throughput_identity(&runs)),
        (5, "scaling", c5_scaling(&runs)),
        (6, "stationarity", c6_stationarity(&runs)),
        (7, "selection fairness", c7_fairness()),
        (8, "quorum and automaton", c8_quorum_automaton()),
        (9, "topology model", c9_topology()),
        (10, "statistics oracles", c10_stats()),
    ];

    println!("reference medians (hardware-dependent, not targets): pool_tps 407.45, block_tps 1031.83, pooling 1756.60 ms, consensus 496.28 ms, sync 43.01 ms, total 2263.51 ms, ttf 2196.29 ms");
    for (n, out) in &runs {
        let tps = median(&col(&out.rows, |r| r.block_tps)).unwrap_or(f64::NAN);
        let consensus = median(&col(&out.rows, |r| r.consensus_ms)).unwrap_or(f64::NAN);
        let sync = median(&col(&out.rows, |r| r.sync_ms)).unwrap_or(f64::NAN);
        let ttf = median(&col(&out.rows, |r| r.ttf_ms)).unwrap_or(f64::NAN);
        println!("measured {n}-node medians (seeded virtual time): block_tps {tps:.2}, consensus {consensus:.2} ms, sync {sync:.2} ms, ttf {ttf:.2} ms");
    }
    for pair in runs.windows(2) {
        let changes: Vec<String> = [
            ("block_tps", (|r: &RoundMetrics| r.block_tps) as fn(&RoundMetrics) -> f64),
            ("preprepare", |r| r.preprepare_ms),
            ("prepare", |r| r.prepare_ms),
            ("commit", |r| r.commit_ms),
            ("sync", |r| r.sync_ms),
            ("consensus", |r| r.consensus_ms),
        ]
        .iter()
        .map(|(name, f)| {
            let a = median(&col(&pair[0].1.rows, *f)).unwrap();
            let b = median(&col(&pair[1].1.rows, *f)).unwrap();
            format!("{name} {}", pct_change(a, b).map_or("undef".into(), |d| format!("{d:+.2}%")))
        })
        .collect();
        println!("measured {}->{} nodes: {}", pair[0].0, pair[1].0, changes.join(", "));
    }
    println!("reference 1->3 nodes: block_tps -1.83%, preprepare +1.15%, prepare +0.04%, commit +77.36%, sync +8.20%, consensus +1.89%");
    println!("reference 3->4 nodes: block_tps -1.10%, preprepare -0.15%, prepare +0.39%, commit +25.48%, sync +1.57%, consensus +1.12%");

    let mut failed = 0;
    for (n, name, o) in &results {
        if !o.pass {
            failed += 1;
        }
        println!("criterion {n:>2} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed in {:.1?}", results.len() - failed, results.len(), t.elapsed());
    if failed == 0 || std::env::var_os("HYBRIDCHAIN_ACCEPTANCE_STRICT").is_none() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
