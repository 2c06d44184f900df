use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::block::Block;
use super::transaction::Transaction;
use crate::crypto::PublicKey;

/// Why a single transaction cannot be applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TxRejection {
    InvalidSignature,
    BadNonce,
    InsufficientBalance,
}

impl fmt::Display for TxRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TxRejection::InvalidSignature => "InvalidSignature",
            TxRejection::BadNonce => "BadNonce",
            TxRejection::InsufficientBalance => "InsufficientBalance",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("transaction {index} cannot be applied: {reason}")]
pub struct ApplyError {
    pub index: usize,
    pub reason: TxRejection,
}

/// Committed per-account balances and last applied nonces.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LedgerState {
    balances: BTreeMap<PublicKey, u64>,
    nonces: BTreeMap<PublicKey, u64>,
}

impl LedgerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_genesis<I: IntoIterator<Item = (PublicKey, u64)>>(accounts: I) -> Self {
        Self {
            balances: accounts.into_iter().collect(),
            nonces: BTreeMap::new(),
        }
    }

    pub fn balance(&self, account: &PublicKey) -> u64 {
        self.balances.get(account).copied().unwrap_or(0)
    }

    /// Last applied nonce, zero for accounts that never sent.
    pub fn nonce(&self, account: &PublicKey) -> u64 {
        self.nonces.get(account).copied().unwrap_or(0)
    }

    pub fn total_balance(&self) -> u128 {
        self.balances.values().map(|&b| b as u128).sum()
    }

    pub fn accounts(&self) -> impl Iterator<Item = (&PublicKey, &u64)> {
        self.balances.iter()
    }

    /// Nonce and balance feasibility against this state. Signatures are not
    /// checked here.
    pub fn check(&self, tx: &Transaction) -> Result<(), TxRejection> {
        if tx.nonce() <= self.nonce(tx.sender()) {
            return Err(TxRejection::BadNonce);
        }
        if tx.amount() > self.balance(tx.sender()) {
            return Err(TxRejection::InsufficientBalance);
        }
        Ok(())
    }

    pub fn apply_tx(&mut self, tx: &Transaction) -> Result<(), TxRejection> {
        self.check(tx)?;
        let sender = *tx.sender();
        *self.balances.get_mut(&sender).expect("checked balance") -= tx.amount();
        *self.balances.entry(*tx.recipient()).or_insert(0) += tx.amount();
        self.nonces.insert(sender, tx.nonce());
        Ok(())
    }
}

/// Applies every transaction of `block` in order, returning the new state.
/// `self` is left untouched when any transaction is infeasible.
pub fn apply_block(ledger: &LedgerState, block: &Block) -> Result<LedgerState, ApplyError> {
    let mut next = ledger.clone();
    for (index, tx) in block.transactions.iter().enumerate() {
        next.apply_tx(tx)
            .map_err(|reason| ApplyError { index, reason })?;
    }
    Ok(next)
}
