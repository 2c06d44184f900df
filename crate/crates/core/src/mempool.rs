//! Per-node transaction pool.
//!
//! Incoming transactions are checked against the committed ledger plus an
//! overlay of spends and nonces already pending in the pool, so a sender
//! cannot double-spend across queued transactions. Valid transactions queue
//! in arrival order; rejects are counted against the round in which they were
//! detected.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::chain::{LedgerState, Transaction, TxRejection};
use crate::crypto::{Digest, PublicKey};

pub const DEFAULT_BATCH_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolConfig {
    pub batch_size: usize,
    pub block_size: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            block_size: crate::chain::DEFAULT_BLOCK_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerificationResult {
    Valid,
    InvalidSignature,
    InsufficientBalance,
    BadNonce,
}

impl VerificationResult {
    pub fn rejection(self) -> Option<TxRejection> {
        match self {
            VerificationResult::Valid => None,
            VerificationResult::InvalidSignature => Some(TxRejection::InvalidSignature),
            VerificationResult::InsufficientBalance => Some(TxRejection::InsufficientBalance),
            VerificationResult::BadNonce => Some(TxRejection::BadNonce),
        }
    }
}

/// Spends and nonces of transactions accepted but not yet committed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PendingOverlay {
    reserved: HashMap<PublicKey, u64>,
    last_nonce: HashMap<PublicKey, u64>,
}

impl PendingOverlay {
    pub fn reserved(&self, account: &PublicKey) -> u64 {
        self.reserved.get(account).copied().unwrap_or(0)
    }

    pub fn last_nonce(&self, account: &PublicKey) -> Option<u64> {
        self.last_nonce.get(account).copied()
    }

    fn add(&mut self, tx: &Transaction) {
        *self.reserved.entry(*tx.sender()).or_insert(0) += tx.amount();
        let n = self.last_nonce.entry(*tx.sender()).or_insert(0);
        *n = (*n).max(tx.nonce());
    }
}

/// Signature, then nonce, then available balance. The order is fixed so the
/// reported reason is deterministic.
pub fn verify_transaction(
    tx: &Transaction,
    ledger: &LedgerState,
    pending: &PendingOverlay,
) -> VerificationResult {
    if !tx.verify_signature() {
        return VerificationResult::InvalidSignature;
    }
    let sender = tx.sender();
    let last = ledger
        .nonce(sender)
        .max(pending.last_nonce(sender).unwrap_or(0));
    if tx.nonce() <= last {
        return VerificationResult::BadNonce;
    }
    let available = ledger.balance(sender).saturating_sub(pending.reserved(sender));
    if tx.amount() > available {
        return VerificationResult::InsufficientBalance;
    }
    VerificationResult::Valid
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledTx {
    pub tx: Transaction,
    pub id: Digest,
    /// When the carrying message was published, in milliseconds.
    pub publish_time: f64,
}

impl PooledTx {
    pub fn new(tx: Transaction, publish_time: f64) -> Self {
        Self {
            id: tx.id(),
            tx,
            publish_time,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestCounts {
    pub accepted: usize,
    pub rejected: BTreeMap<TxRejection, usize>,
}

impl IngestCounts {
    pub fn rejected_total(&self) -> usize {
        self.rejected.values().sum()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("pool holds {have} valid transactions, block needs {need}")]
pub struct NotReady {
    pub have: usize,
    pub need: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct RoundTally {
    verified: u64,
    failed: u64,
    by_reason: BTreeMap<TxRejection, u64>,
}

#[derive(Debug, Clone)]
pub struct Mempool {
    config: PoolConfig,
    queue: VecDeque<PooledTx>,
    in_flight: Vec<PooledTx>,
    overlay: PendingOverlay,
    round: u64,
    tallies: BTreeMap<u64, RoundTally>,
    rejects_by_reason: BTreeMap<TxRejection, u64>,
}

impl Mempool {
    pub fn new(config: PoolConfig) -> Self {
        Self {
            config,
            queue: VecDeque::new(),
            in_flight: Vec::new(),
            overlay: PendingOverlay::default(),
            round: 0,
            tallies: BTreeMap::new(),
            rejects_by_reason: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &PoolConfig {
        &self.config
    }

    /// Rejects detected from now on are attributed to `round`.
    pub fn set_round(&mut self, round: u64) {
        self.round = round;
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn is_ready(&self) -> bool {
        self.queue.len() >= self.config.block_size
    }

    pub fn overlay(&self) -> &PendingOverlay {
        &self.overlay
    }

    pub fn ingest_batch<I>(&mut self, ledger: &LedgerState, txs: I) -> IngestCounts
    where
        I: IntoIterator<Item = PooledTx>,
    {
        let mut counts = IngestCounts::default();
        let tally = self.tallies.entry(self.round).or_default();
        for p in txs {
            tally.verified += 1;
            match verify_transaction(&p.tx, ledger, &self.overlay).rejection() {
                None => {
                    self.overlay.add(&p.tx);
                    self.queue.push_back(p);
                    counts.accepted += 1;
                }
                Some(reason) => {
                    tally.failed += 1;
                    *tally.by_reason.entry(reason).or_insert(0) += 1;
                    *counts.rejected.entry(reason).or_insert(0) += 1;
                    *self.rejects_by_reason.entry(reason).or_insert(0) += 1;
                }
            }
        }
        counts
    }

    /// Removes and returns the oldest `block_size` valid transactions. They
    /// stay reserved until [`Mempool::commit`] or [`Mempool::restore`].
    pub fn drain_block_candidates(&mut self) -> Result<Vec<PooledTx>, NotReady> {
        let need = self.config.block_size;
        if self.queue.len() < need {
            return Err(NotReady {
                have: self.queue.len(),
                need,
            });
        }
        let out: Vec<PooledTx> = self.queue.drain(..need).collect();
        self.in_flight.extend_from_slice(&out);
        Ok(out)
    }

    /// Puts drained candidates back at the head of the queue after an abort.
    pub fn restore(&mut self) {
        let back = std::mem::take(&mut self.in_flight);
        for p in back.into_iter().rev() {
            self.queue.push_front(p);
        }
    }

    /// Reconciles the pool with a newly committed ledger: committed
    /// transactions disappear, undelivered candidates return to the queue
    /// and anything no longer feasible is dropped. Returns the number of
    /// dropped transactions.
    pub fn commit(&mut self, ledger: &LedgerState, committed: &HashSet<Digest>) -> usize {
        let in_flight = std::mem::take(&mut self.in_flight);
        let queued = std::mem::take(&mut self.queue);
        self.overlay = PendingOverlay::default();
        let mut dropped = 0;
        for p in in_flight.into_iter().chain(queued) {
            if committed.contains(&p.id) {
                continue;
            }
            let s = p.tx.sender();
            let last = ledger.nonce(s).max(self.overlay.last_nonce(s).unwrap_or(0));
            let available = ledger.balance(s).saturating_sub(self.overlay.reserved(s));
            if p.tx.nonce() <= last || p.tx.amount() > available {
                dropped += 1;
                continue;
            }
            self.overlay.add(&p.tx);
            self.queue.push_back(p);
        }
        dropped
    }

    /// Rejects attributed to `round`.
    pub fn failed_count(&self, round: u64) -> u64 {
        self.tallies.get(&round).map_or(0, |t| t.failed)
    }

    /// Transactions verified (valid or not) during `round`.
    pub fn verified_count(&self, round: u64) -> u64 {
        self.tallies.get(&round).map_or(0, |t| t.verified)
    }

    /// Rejects attributed to `round`, by reason.
    pub fn rejects_for_round(&self, round: u64) -> BTreeMap<TxRejection, u64> {
        self.tallies.get(&round).map(|t| t.by_reason.clone()).unwrap_or_default()
    }

    pub fn total_failed(&self) -> u64 {
        self.tallies.values().map(|t| t.failed).sum()
    }

    pub fn rejects_by_reason(&self) -> &BTreeMap<TxRejection, u64> {
        &self.rejects_by_reason
    }
}
