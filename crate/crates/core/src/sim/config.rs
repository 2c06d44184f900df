//! Flat `key = value` harness configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::master::DEFAULT_STAKE_CAP;
use crate::transport::{AckMode, Compression};
use crate::workload::FraudSchedule;

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    pub nodes: usize,
    pub validators_per_round: Option<usize>,
    pub sync_timeout_ms: u64,
    pub batch_size: usize,
    pub block_size: usize,
    pub partitions: u32,
    pub linger_ms: u64,
    pub min_batch_bytes: usize,
    pub ack_mode: AckMode,
    pub compression: Compression,
    pub broker_count: u32,
    /// Uniform per-delivery delay range in milliseconds.
    pub latency_injection: Option<(f64, f64)>,
    pub stake_cap_fraction: f64,
    pub stakes: Option<Vec<u64>>,
    pub granularity_s: u64,
    pub rounds: u64,
    pub user_count: usize,
    pub fraud_schedule: FraudSchedule,
    pub rng_seed: u64,
    /// `(node index, round)` pairs in which that node withholds its commit
    /// vote.
    pub silent_commit: BTreeSet<(u32, u64)>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            nodes: 3,
            validators_per_round: None,
            sync_timeout_ms: 5000,
            batch_size: 64,
            block_size: 512,
            partitions: 5,
            linger_ms: 10,
            min_batch_bytes: 64_000,
            ack_mode: AckMode::Leader,
            compression: Compression::Lz4,
            broker_count: 1,
            latency_injection: None,
            stake_cap_fraction: DEFAULT_STAKE_CAP,
            stakes: None,
            granularity_s: 5,
            rounds: 130,
            user_count: 1000,
            fraud_schedule: FraudSchedule::default(),
            rng_seed: 1,
            silent_commit: BTreeSet::new(),
        }
    }
}

/// Every problem found, keyed by the offending config key.
#[derive(Debug, Error, PartialEq, Eq)]
pub struct ConfigError {
    pub diagnostics: Vec<(String, String)>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (key, msg)) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{key}: {msg}")?;
        }
        Ok(())
    }
}

pub const KEYS: [&str; 20] = [
    "deployment.nodes",
    "consensus.validators_per_round",
    "consensus.sync_timeout_ms",
    "pool.batch_size",
    "pool.block_size",
    "broker.partitions",
    "broker.linger_ms",
    "broker.min_batch_bytes",
    "broker.acks",
    "broker.compression",
    "broker.count",
    "broker.latency_injection",
    "selection.stake_cap_fraction",
    "selection.stakes",
    "timestamp.granularity_s",
    "workload.rounds",
    "workload.user_count",
    "workload.fraud_schedule",
    "rng_seed",
    "faults.silent_commit",
];

fn parse_num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("`{v}` is not a valid number"))
}

impl HarnessConfig {
    pub fn k(&self) -> usize {
        self.validators_per_round.unwrap_or(self.nodes)
    }

    pub fn stakes(&self) -> Vec<u64> {
        self.stakes.clone().unwrap_or_else(|| vec![1; self.nodes])
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            diagnostics: vec![(path.display().to_string(), e.to_string())],
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut diags = Vec::new();
        let mut seen = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                diags.push((format!("line {}", no + 1), "expected `key = value`".to_string()));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), no + 1).is_some() {
                diags.push((key.to_string(), "set more than once".to_string()));
                continue;
            }
            if let Err(msg) = cfg.set(key, value) {
                diags.push((key.to_string(), msg));
            }
        }
        diags.extend(cfg.check());
        if diags.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError { diagnostics: diags })
        }
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "deployment.nodes" => self.nodes = parse_num(v)?,
            "consensus.validators_per_round" => self.validators_per_round = Some(parse_num(v)?),
            "consensus.sync_timeout_ms" => self.sync_timeout_ms = parse_num(v)?,
            "pool.batch_size" => self.batch_size = parse_num(v)?,
            "pool.block_size" => self.block_size = parse_num(v)?,
            "broker.partitions" => self.partitions = parse_num(v)?,
            "broker.linger_ms" => self.linger_ms = parse_num(v)?,
            "broker.min_batch_bytes" => self.min_batch_bytes = parse_num(v)?,
            "broker.acks" => {
                self.ack_mode = match v {
                    "1" | "leader" => AckMode::Leader,
                    "all" | "-1" => AckMode::All,
                    _ => return Err(format!("`{v}` is not one of 1, leader, all, -1")),
                }
            }
            "broker.compression" => {
                self.compression = match v {
                    "none" => Compression::None,
                    "lz4" => Compression::Lz4,
                    _ => return Err(format!("`{v}` is not one of none, lz4")),
                }
            }
            "broker.count" => self.broker_count = parse_num(v)?,
            "broker.latency_injection" => {
                self.latency_injection = if v == "off" {
                    None
                } else {
                    let (a, b) = v.split_once('-').ok_or_else(|| format!("`{v}` is not `off` or `min-max`"))?;
                    Some((parse_num(a.trim())?, parse_num(b.trim())?))
                }
            }
            "selection.stake_cap_fraction" => self.stake_cap_fraction = parse_num(v)?,
            "selection.stakes" => {
                self.stakes = Some(v.split(',').map(|s| parse_num(s.trim())).collect::<Result<_, _>>()?)
            }
            "timestamp.granularity_s" => self.granularity_s = parse_num(v)?,
            "workload.rounds" => self.rounds = parse_num(v)?,
            "workload.user_count" => self.user_count = parse_num(v)?,
            "workload.fraud_schedule" => self.fraud_schedule = v.parse().map_err(|e| format!("{e}"))?,
            "rng_seed" => self.rng_seed = parse_num(v)?,
            "faults.silent_commit" => {
                let mut set = BTreeSet::new();
                for e in v.split(',').map(str::trim).filter(|e| !e.is_empty()) {
                    let (n, r) = e.split_once(':').ok_or_else(|| format!("`{e}` is not `node:round`"))?;
                    set.insert((parse_num(n.trim())?, parse_num(r.trim())?));
                }
                self.silent_commit = set;
            }
            _ => return Err("unknown key".to_string()),
        }
        Ok(())
    }

    fn check(&self) -> Vec<(String, String)> {
        let mut d = Vec::new();
        let mut bad = |k: &str, m: String| d.push((k.to_string(), m));
        if self.nodes == 0 {
            bad("deployment.nodes", "must be at least 1".into());
        }
        if let Some(k) = self.validators_per_round {
            if k == 0 || k > self.nodes {
                bad("consensus.validators_per_round", format!("must be in 1..={}", self.nodes));
            }
        }
        if self.sync_timeout_ms == 0 {
            bad("consensus.sync_timeout_ms", "must be positive".into());
        }
        if self.batch_size == 0 {
            bad("pool.batch_size", "must be positive".into());
        }
        if self.block_size == 0 {
            bad("pool.block_size", "must be positive".into());
        }
        if self.partitions == 0 {
            bad("broker.partitions", "must be positive".into());
        }
        if self.broker_count == 0 {
            bad("broker.count", "must be positive".into());
        }
        if let Some((a, b)) = self.latency_injection {
            if !(a >= 0.0 && b >= a) {
                bad("broker.latency_injection", "need 0 <= min <= max".into());
            }
        }
        if !(self.stake_cap_fraction > 0.0 && self.stake_cap_fraction <= 1.0) {
            bad("selection.stake_cap_fraction", "must be in (0, 1]".into());
        }
        if let Some(s) = &self.stakes {
            if s.len() != self.nodes {
                bad("selection.stakes", format!("has {} entries for {} nodes", s.len(), self.nodes));
            }
        }
        if self.granularity_s == 0 {
            bad("timestamp.granularity_s", "must be positive".into());
        }
        if self.rounds == 0 {
            bad("workload.rounds", "must be at least 1".into());
        }
        if self.user_count < 2 {
            bad("workload.user_count", "must be at least 2".into());
        }
        if let Some(&(n, _)) = self.silent_commit.iter().find(|(n, _)| *n as usize >= self.nodes) {
            bad("faults.silent_commit", format!("node {n} does not exist"));
        }
        d
    }

    /// Every key with its effective value, one `key = value` line each.
    pub fn echo(&self) -> String {
        let stakes = self.stakes().iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let silent = self
            .silent_commit
            .iter()
            .map(|(n, r)| format!("{n}:{r}"))
            .collect::<Vec<_>>()
            .join(",");
        let values = [
            self.nodes.to_string(),
            self.k().to_string(),
            self.sync_timeout_ms.to_string(),
            self.batch_size.to_string(),
            self.block_size.to_string(),
            self.partitions.to_string(),
            self.linger_ms.to_string(),
            self.min_batch_bytes.to_string(),
            match self.ack_mode {
                AckMode::Leader => "1".into(),
                AckMode::All => "all".into(),
            },
            match self.compression {
                Compression::None => "none".into(),
                Compression::Lz4 => "lz4".into(),
            },
            self.broker_count.to_string(),
            self.latency_injection.map_or("off".into(), |(a, b)| format!("{a}-{b}")),
            self.stake_cap_fraction.to_string(),
            stakes,
            self.granularity_s.to_string(),
            self.rounds.to_string(),
            self.user_count.to_string(),
            self.fraud_schedule.to_string(),
            self.rng_seed.to_string(),
            silent,
        ];
        KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = HarnessConfig::parse("# nothing\n").unwrap();
        assert_eq!(c, HarnessConfig::default());
        assert_eq!(c.k(), 3);
        assert_eq!(c.stakes(), vec![1, 1, 1]);
    }

    #[test]
    fn echo_round_trips() {
        let text = "deployment.nodes = 4\nselection.stakes = 1,2,3,4\nworkload.fraud_schedule = 1-10:0.5,11-:1\nbroker.latency_injection = 1-3\nfaults.silent_commit = 2:5\nbroker.acks = all\n";
        let c = HarnessConfig::parse(text).unwrap();
        let again = HarnessConfig::parse(&c.echo()).unwrap();
        assert_eq!(HarnessConfig { validators_per_round: Some(4), ..c.clone() }, again);
        for k in KEYS {
            assert!(c.echo().contains(k), "{k}");
        }
    }

    #[test]
    fn diagnostics_name_keys() {
        let err = HarnessConfig::parse("deployment.nodes = 2\nconsensus.validators_per_round = 5\nbogus = 1\npool.block_size = x\n")
            .unwrap_err();
        let keys: Vec<&str> = err.diagnostics.iter().map(|(k, _)| k.as_str()).collect();
        assert!(keys.contains(&"bogus"));
        assert!(keys.contains(&"pool.block_size"));
        assert!(keys.contains(&"consensus.validators_per_round"));
    }
}
