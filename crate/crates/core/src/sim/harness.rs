//! Builds a deployment from a [`HarnessConfig`], runs it under either
//! scheduler and collects every artifact.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufWriter};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chain::{validate_block, Block, LedgerState};
use crate::consensus::{topics, Directory, NodeId, Validator, ValidatorConfig, ValidatorFaults, ValidatorReport};
use crate::crypto::{Digest, KeyPair};
use crate::master::{Master, MasterConfig, MasterReport, RoundRecord, SelectionConfig, ValidatorRegistry, DEFAULT_RETRY_BUDGET};
use crate::mempool::PoolConfig;
use crate::metrics::{merge_node_rows, write_csv, RoundMetrics};
use crate::runtime::{run_seeded, run_threaded, Actor, ActorClock, RunError, Step};
use crate::transport::{Broker, BrokerConfig, LatencyInjection, Visibility};
use crate::workload::{generate_users, InjectionLog, TrafficGenerator, TrafficSource, WorkloadError};

use super::config::HarnessConfig;
use super::report::summary_report;

/// Unix milliseconds the seeded scheduler's virtual time 0 maps to.
pub const SEEDED_GENESIS_WALL_MS: u64 = 1_700_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerMode {
    Real,
    Seeded,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("registry: {0}")]
    Registry(String),
}

enum Participant {
    Master(Box<Master>),
    Validator(Box<Validator>),
    Workload(Box<TrafficSource>),
}

impl Actor for Participant {
    fn label(&self) -> String {
        match self {
            Participant::Master(a) => a.label(),
            Participant::Validator(a) => a.label(),
            Participant::Workload(a) => a.label(),
        }
    }

    fn step(&mut self, clock: &mut ActorClock) -> Result<Step, RunError> {
        match self {
            Participant::Master(a) => a.step(clock),
            Participant::Validator(a) => a.step(clock),
            Participant::Workload(a) => a.step(clock),
        }
    }

    fn wake_at(&self) -> Option<f64> {
        match self {
            Participant::Master(a) => a.wake_at(),
            Participant::Validator(a) => a.wake_at(),
            Participant::Workload(a) => a.wake_at(),
        }
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: HarnessConfig,
    pub mode: SchedulerMode,
    pub genesis: LedgerState,
    /// One merged row per committed round.
    pub rows: Vec<RoundMetrics>,
    pub nodes: Vec<ValidatorReport>,
    pub master: MasterReport,
    pub injections: InjectionLog,
    pub steps: Option<u64>,
}

impl RunOutput {
    pub fn halted(&self) -> bool {
        self.master.halted
    }

    /// Heights at which the nodes' chains are not byte-identical, plus
    /// nodes whose chain length differs from the longest.
    pub fn chain_divergence(&self) -> Vec<String> {
        let mut out = Vec::new();
        let longest = self.nodes.iter().map(|n| n.chain.len()).max().unwrap_or(0);
        for n in &self.nodes {
            if n.chain.len() != longest {
                out.push(format!("{} has {} blocks, expected {longest}", n.node_id, n.chain.len()));
            }
        }
        for h in 0..longest {
            let distinct: BTreeSet<Vec<u8>> = self.nodes.iter().filter_map(|n| n.chain.get(h)).map(Block::to_bytes).collect();
            if distinct.len() > 1 {
                out.push(format!("height {} has {} distinct blocks", h + 1, distinct.len()));
            }
        }
        out
    }

    /// Replays the first node's chain from genesis, returning every
    /// transaction that would not validate.
    pub fn invalid_committed(&self) -> Vec<String> {
        let Some(node) = self.nodes.first() else {
            return Vec::new();
        };
        let mut ledger = self.genesis.clone();
        let mut prev = Digest::ZERO;
        let mut out = Vec::new();
        for b in &node.chain {
            if let Err(v) = validate_block(b, &ledger, &prev, self.config.granularity_s) {
                out.push(format!("height {}: {v:?}", b.header.height));
            }
            for tx in &b.transactions {
                let _ = ledger.apply_tx(tx);
            }
            prev = b.hash();
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        write_csv(&self.rows, &dir.join("metrics.csv")).map_err(io::Error::other)?;
        let nodes_dir = dir.join("nodes");
        fs::create_dir_all(&nodes_dir)?;
        for n in &self.nodes {
            write_csv(&n.metrics, &nodes_dir.join(format!("{}.csv", n.node_id))).map_err(io::Error::other)?;
        }
        self.injections
            .write_jsonl(BufWriter::new(fs::File::create(dir.join("injections.jsonl"))?))?;
        RoundRecord::write_jsonl(
            &self.master.records,
            BufWriter::new(fs::File::create(dir.join("rounds.jsonl"))?),
        )?;
        fs::write(dir.join("report.txt"), summary_report(self))
    }
}

fn derive_seed(base: u64, label: &str) -> u64 {
    crate::crypto::sha256_concat(&[&base.to_le_bytes(), label.as_bytes()]).prefix_u64()
}

fn create_topics(broker: &Broker, partitions: u32) -> Result<(), RunError> {
    for t in topics::CONSENSUS.iter().chain([&topics::TRANSACTIONS]) {
        broker.create_topic(t, partitions)?;
    }
    broker.create_topic(topics::TRAFFIC_MANIFEST, 1)?;
    broker.create_topic(topics::BLOCKS, 1)?;
    Ok(())
}

pub fn run_simulation(cfg: &HarnessConfig, mode: SchedulerMode) -> Result<RunOutput, SimError> {
    let broker = Broker::new(BrokerConfig {
        partitions_per_topic: cfg.partitions,
        linger_ms: cfg.linger_ms,
        min_batch_bytes: cfg.min_batch_bytes,
        ack_mode: cfg.ack_mode,
        compression: cfg.compression,
        broker_count: cfg.broker_count,
        visibility: match mode {
            SchedulerMode::Real => Visibility::Timed,
            SchedulerMode::Seeded => Visibility::Manual,
        },
        latency: cfg.latency_injection.map(|(min_ms, max_ms)| LatencyInjection {
            min_ms,
            max_ms,
            seed: derive_seed(cfg.rng_seed, "latency"),
        }),
    });
    create_topics(&broker, cfg.partitions)?;

    let mut key_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, "keys"));
    let master_key = KeyPair::generate(&mut key_rng);
    let node_keys: Vec<KeyPair> = (0..cfg.nodes).map(|_| KeyPair::generate(&mut key_rng)).collect();
    let stakes = cfg.stakes();

    let mut registry = ValidatorRegistry::new();
    for (i, k) in node_keys.iter().enumerate() {
        registry
            .register_validator(NodeId(i as u32), k.public_key(), stakes[i])
            .map_err(|e| SimError::Registry(e.to_string()))?;
    }
    let directory = Arc::new(Directory::new(
        node_keys
            .iter()
            .enumerate()
            .map(|(i, k)| (NodeId(i as u32), k.public_key()))
            .chain([(NodeId::MASTER, master_key.public_key())]),
    ));

    let users = generate_users(cfg.user_count, derive_seed(cfg.rng_seed, "users"))?;
    let generator = TrafficGenerator::new(
        users,
        cfg.rounds,
        cfg.block_size,
        cfg.batch_size,
        cfg.fraud_schedule.clone(),
        derive_seed(cfg.rng_seed, "traffic"),
    );
    let genesis = LedgerState::with_genesis(generator.genesis());

    let mut actors = Vec::new();
    let master_cfg = MasterConfig {
        selection: SelectionConfig {
            validators_per_round: cfg.k(),
            stake_cap_fraction: cfg.stake_cap_fraction,
            seed_base: derive_seed(cfg.rng_seed, "selection").to_le_bytes().to_vec(),
        },
        sync_timeout_ms: cfg.sync_timeout_ms,
        rounds: cfg.rounds,
        retry_budget: DEFAULT_RETRY_BUDGET,
    };
    actors.push(Participant::Master(Box::new(Master::new(
        master_cfg,
        master_key.clone(),
        registry,
        Arc::clone(&broker),
    )?)));
    for (i, key) in node_keys.into_iter().enumerate() {
        let id = NodeId(i as u32);
        let faults = ValidatorFaults {
            silent_commit_rounds: cfg.silent_commit.iter().filter(|(n, _)| *n == id.0).map(|(_, r)| *r).collect(),
        };
        let vcfg = ValidatorConfig {
            node_id: id,
            stake: stakes[i],
            granularity_s: cfg.granularity_s,
            pool: PoolConfig {
                batch_size: cfg.batch_size,
                block_size: cfg.block_size,
            },
            sync_timeout_ms: cfg.sync_timeout_ms,
            rounds: cfg.rounds,
        };
        actors.push(Participant::Validator(Box::new(Validator::new(
            vcfg,
            key,
            Arc::clone(&directory),
            Arc::clone(&broker),
            genesis.clone(),
            faults,
        )?)));
    }
    actors.push(Participant::Workload(Box::new(TrafficSource::new(
        generator,
        cfg.rounds,
        Arc::clone(&broker),
        master_key.public_key(),
    )?)));

    let budget_ms = cfg.rounds * (DEFAULT_RETRY_BUDGET as u64 + 1) * 5 * cfg.sync_timeout_ms + 120_000;
    let (actors, steps) = match mode {
        SchedulerMode::Seeded => {
            let (a, t) = run_seeded(actors, &broker, derive_seed(cfg.rng_seed, "scheduler"), SEEDED_GENESIS_WALL_MS, budget_ms)?;
            (a, Some(t))
        }
        SchedulerMode::Real => (run_threaded(actors, &broker, Duration::from_millis(budget_ms))?, None),
    };

    let mut nodes = Vec::new();
    let mut master = None;
    let mut injections = InjectionLog::default();
    for a in actors {
        match a {
            Participant::Master(m) => master = Some(m.report()),
            Participant::Validator(v) => nodes.push(v.report()),
            Participant::Workload(w) => injections = w.log().clone(),
        }
    }
    let per_node: Vec<Vec<RoundMetrics>> = nodes.iter().map(|n| n.metrics.clone()).collect();
    Ok(RunOutput {
        config: cfg.clone(),
        mode,
        genesis,
        rows: merge_node_rows(&per_node),
        nodes,
        master: master.expect("master actor present"),
        injections,
        steps,
    })
}
