use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::chain::{sign_with, Transaction, TxRejection, UnsignedTransaction};
use crate::crypto::{KeyPair, PublicKey};

use super::schedule::FraudSchedule;

const GENESIS_MIN: u64 = 1_000_000;
const GENESIS_MAX: u64 = 2_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorkloadError {
    #[error("need at least two users, got {0}")]
    TooFewUsers(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FraudKind {
    InvalidSignature,
    InsufficientBalance,
    BadNonce,
}

impl FraudKind {
    pub const ALL: [FraudKind; 3] = [
        FraudKind::InvalidSignature,
        FraudKind::InsufficientBalance,
        FraudKind::BadNonce,
    ];

    /// The reason a verifying pool reports for this kind.
    pub fn rejection(self) -> TxRejection {
        match self {
            FraudKind::InvalidSignature => TxRejection::InvalidSignature,
            FraudKind::InsufficientBalance => TxRejection::InsufficientBalance,
            FraudKind::BadNonce => TxRejection::BadNonce,
        }
    }
}

#[derive(Debug, Clone)]
pub struct User {
    pub key: KeyPair,
    pub genesis_balance: u64,
}

/// Deterministic under `seed`; balances are drawn from a range wide enough
/// that valid load over a full run cannot exhaust an account.
pub fn generate_users(n: usize, seed: u64) -> Result<Vec<User>, WorkloadError> {
    if n < 2 {
        return Err(WorkloadError::TooFewUsers(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| User {
            key: KeyPair::generate(&mut rng),
            genesis_balance: rng.gen_range(GENESIS_MIN..=GENESIS_MAX),
        })
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RoundInjection {
    pub round: u64,
    pub valid_sent: u64,
    pub fraud_sent: u64,
    pub fraud_kinds: BTreeMap<FraudKind, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InjectionLog {
    pub rounds: Vec<RoundInjection>,
}

impl InjectionLog {
    pub fn round(&self, round: u64) -> Option<&RoundInjection> {
        self.rounds.iter().find(|r| r.round == round)
    }

    pub fn total_fraud(&self) -> u64 {
        self.rounds.iter().map(|r| r.fraud_sent).sum()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.rounds {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Produces each round's traffic against a shadow of the ledger: spends
/// are debited as soon as they are emitted and credits become spendable two
/// rounds later, once the carrying block is certainly committed.
#[derive(Debug)]
pub struct TrafficGenerator {
    users: Vec<User>,
    public: Vec<PublicKey>,
    available: Vec<u64>,
    last_nonce: Vec<u64>,
    pending_credits: BTreeMap<u64, Vec<(usize, u64)>>,
    total_supply: u64,
    rounds: u64,
    txs_per_block: usize,
    batch_size: usize,
    schedule: FraudSchedule,
    rng: ChaCha8Rng,
    log: InjectionLog,
}

impl TrafficGenerator {
    pub fn new(
        users: Vec<User>,
        rounds: u64,
        txs_per_block: usize,
        batch_size: usize,
        schedule: FraudSchedule,
        seed: u64,
    ) -> Self {
        let public = users.iter().map(|u| u.key.public_key()).collect();
        let available: Vec<u64> = users.iter().map(|u| u.genesis_balance).collect();
        Self {
            total_supply: available.iter().sum(),
            last_nonce: vec![0; users.len()],
            public,
            available,
            users,
            pending_credits: BTreeMap::new(),
            rounds: rounds.max(1),
            txs_per_block,
            batch_size: batch_size.max(1),
            schedule,
            rng: ChaCha8Rng::seed_from_u64(seed),
            log: InjectionLog::default(),
        }
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn genesis(&self) -> Vec<(PublicKey, u64)> {
        self.users.iter().map(|u| (u.key.public_key(), u.genesis_balance)).collect()
    }

    pub fn log(&self) -> &InjectionLog {
        &self.log
    }

    pub fn schedule(&self) -> &FraudSchedule {
        &self.schedule
    }

    fn pick_sender(&mut self) -> usize {
        loop {
            let i = self.rng.gen_range(0..self.users.len());
            if self.available[i] > 0 {
                return i;
            }
        }
    }

    fn pick_recipient(&mut self, sender: usize) -> usize {
        loop {
            let j = self.rng.gen_range(0..self.users.len());
            if j != sender {
                return j;
            }
        }
    }

    /// `txs_per_block` valid transfers plus `floor(ratio × txs_per_block)`
    /// frauds, shuffled and cut into batches of `batch_size`. Each sender's
    /// transactions carry ascending nonces in emission order.
    pub fn generate_round_traffic(&mut self, round: u64, created_at_ms: u64) -> Vec<Vec<Transaction>> {
        let matured: Vec<u64> = self.pending_credits.range(..round.saturating_sub(1)).map(|(r, _)| *r).collect();
        for r in matured {
            for (j, amount) in self.pending_credits.remove(&r).unwrap_or_default() {
                self.available[j] += amount;
            }
        }
        let ratio = self.schedule.ratio_for(round);
        let n_fraud = (ratio * self.txs_per_block as f64).floor() as usize;
        let mut slots: Vec<Option<FraudKind>> = vec![None; self.txs_per_block];
        for _ in 0..n_fraud {
            slots.push(Some(*FraudKind::ALL.choose(&mut self.rng).expect("non-empty")));
        }
        slots.shuffle(&mut self.rng);

        let mut entry = RoundInjection {
            round,
            ..RoundInjection::default()
        };
        let mut txs = Vec::with_capacity(slots.len());
        for slot in slots {
            let s = self.pick_sender();
            let r = self.pick_recipient(s);
            let body = |amount, nonce| UnsignedTransaction {
                sender: self.public[s],
                recipient: self.public[r],
                amount,
                nonce,
                created_at: created_at_ms,
            };
            let tx = match slot {
                None => {
                    let cap = (self.available[s] / self.rounds).max(1);
                    let amount = self.rng.gen_range(1..=cap);
                    self.available[s] -= amount;
                    self.last_nonce[s] += 1;
                    self.pending_credits.entry(round).or_default().push((r, amount));
                    entry.valid_sent += 1;
                    sign_with(body(amount, self.last_nonce[s]), &self.users[s].key)
                }
                Some(kind) => {
                    entry.fraud_sent += 1;
                    *entry.fraud_kinds.entry(kind).or_insert(0) += 1;
                    let next = self.last_nonce[s] + 1;
                    match kind {
                        FraudKind::InvalidSignature => {
                            let amount = self.rng.gen_range(1..=10);
                            let mut tx = sign_with(body(amount, next), &self.users[s].key);
                            tx.signature.0[self.rng.gen_range(0..64)] ^= 1 << self.rng.gen_range(0..8);
                            tx
                        }
                        FraudKind::InsufficientBalance => {
                            let amount = self.total_supply + 1 + self.rng.gen_range(0..1000);
                            sign_with(body(amount, next), &self.users[s].key)
                        }
                        FraudKind::BadNonce => sign_with(body(1, self.last_nonce[s]), &self.users[s].key),
                    }
                }
            };
            txs.push(tx);
        }
        self.log.rounds.push(entry);
        txs.chunks(self.batch_size).map(<[Transaction]>::to_vec).collect()
    }
}
