use std::collections::BTreeMap;

use thiserror::Error;

use crate::consensus::NodeId;
use crate::crypto::{sha256_concat, Digest};

use super::registry::ValidatorRegistry;

pub const DEFAULT_STAKE_CAP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub validators_per_round: usize,
    pub stake_cap_fraction: f64,
    pub seed_base: Vec<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("no eligible proposals")]
    NoEligible,
}

/// Seed for one selection: chained to the last committed block so later
/// selections cannot be computed in advance. Retries of a round fold in the
/// attempt number.
pub fn round_seed(seed_base: &[u8], round: u64, last_hash: &Digest, attempt: u32) -> Digest {
    let r = round.to_le_bytes();
    if attempt == 0 {
        sha256_concat(&[seed_base, &r, &last_hash.0])
    } else {
        sha256_concat(&[seed_base, &r, &last_hash.0, &attempt.to_le_bytes()])
    }
}

/// `H(seed ‖ round ‖ node_id)` mapped into the open interval (0, 1).
pub fn selection_uniform(seed: &Digest, round: u64, node: NodeId) -> f64 {
    let h = sha256_concat(&[&seed.0, &round.to_le_bytes(), &node.0.to_le_bytes()]);
    ((h.prefix_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// `ln(u) / stake`, the logarithm of `u^(1/stake)`; larger wins. Zero stake
/// maps to negative infinity.
pub fn selection_key(seed: &Digest, round: u64, node: NodeId, stake: u64) -> f64 {
    if stake == 0 {
        return f64::NEG_INFINITY;
    }
    selection_uniform(seed, round, node).ln() / stake as f64
}

/// Weighted sampling without replacement: the `k` largest keys, ties broken
/// by node id.
pub fn select_validators(
    eligible: &BTreeMap<NodeId, u64>,
    k: usize,
    seed: &Digest,
    round: u64,
) -> Result<Vec<NodeId>, SelectionError> {
    if eligible.is_empty() {
        return Err(SelectionError::NoEligible);
    }
    let mut keyed: Vec<(f64, NodeId)> = eligible
        .iter()
        .map(|(&id, &stake)| (selection_key(seed, round, id, stake), id))
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().take(k).map(|(_, id)| id).collect())
}

/// Eligible proposals (Active senders, stake clipped to the registered
/// amount) and the resulting selection.
pub fn plan_round(
    registry: &ValidatorRegistry,
    proposals: &BTreeMap<NodeId, u64>,
    config: &SelectionConfig,
    round: u64,
    seed: &Digest,
) -> Result<(BTreeMap<NodeId, u64>, Vec<NodeId>), SelectionError> {
    let eligible: BTreeMap<NodeId, u64> = proposals
        .iter()
        .filter_map(|(&id, &stake)| {
            registry
                .get(id)
                .filter(|_| registry.is_active(id))
                .map(|e| (id, stake.min(e.stake)))
        })
        .collect();
    let selection = select_validators(&eligible, config.validators_per_round, seed, round)?;
    Ok((eligible, selection))
}
