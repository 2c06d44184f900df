use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::consensus::{Envelope, NodeId};
use crate::crypto::PublicKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ValidatorStatus {
    Active,
    Denied,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatorEntry {
    pub public_key: PublicKey,
    pub stake: u64,
    pub status: ValidatorStatus,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("validator id {0} already registered")]
    Duplicate(NodeId),
    #[error("id {0} is reserved")]
    Reserved(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum AuthRejection {
    Unknown,
    Denied,
    BadSignature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Authentication {
    Accepted,
    Rejected(AuthRejection),
}

#[derive(Debug, Clone, Default)]
pub struct ValidatorRegistry {
    entries: BTreeMap<NodeId, ValidatorEntry>,
}

impl ValidatorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_validator(&mut self, id: NodeId, public_key: PublicKey, stake: u64) -> Result<(), RegistryError> {
        if id == NodeId::MASTER {
            return Err(RegistryError::Reserved(id));
        }
        if self.entries.contains_key(&id) {
            return Err(RegistryError::Duplicate(id));
        }
        self.entries.insert(
            id,
            ValidatorEntry {
                public_key,
                stake,
                status: ValidatorStatus::Active,
            },
        );
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: NodeId) -> Option<&ValidatorEntry> {
        self.entries.get(&id)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&NodeId, &ValidatorEntry)> {
        self.entries.iter()
    }

    pub fn active_ids(&self) -> BTreeSet<NodeId> {
        self.entries
            .iter()
            .filter(|(_, e)| e.status == ValidatorStatus::Active)
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn is_active(&self, id: NodeId) -> bool {
        self.entries.get(&id).is_some_and(|e| e.status == ValidatorStatus::Active)
    }

    pub fn authenticate(&self, env: &Envelope) -> Authentication {
        let Some(entry) = self.entries.get(&env.sender) else {
            return Authentication::Rejected(AuthRejection::Unknown);
        };
        if entry.status == ValidatorStatus::Denied {
            return Authentication::Rejected(AuthRejection::Denied);
        }
        if !env.verify(&entry.public_key) {
            return Authentication::Rejected(AuthRejection::BadSignature);
        }
        Authentication::Accepted
    }

    /// Denies every validator whose share of the registered stake exceeds
    /// `cap_fraction`. A registry with a single validator is left alone,
    /// since its only member necessarily holds the whole stake.
    pub fn enforce_stake_cap(&mut self, cap_fraction: f64) -> BTreeSet<NodeId> {
        let total: u128 = self.entries.values().map(|e| e.stake as u128).sum();
        let mut denied = BTreeSet::new();
        if total == 0 || self.entries.len() < 2 {
            return denied;
        }
        for (id, e) in self.entries.iter_mut() {
            if e.stake as f64 / total as f64 > cap_fraction {
                e.status = ValidatorStatus::Denied;
                denied.insert(*id);
            }
        }
        denied
    }
}
