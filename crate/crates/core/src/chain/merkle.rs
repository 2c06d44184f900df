use thiserror::Error;

use crate::crypto::{sha256_concat, Digest};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot build a merkle tree with no leaves")]
pub struct EmptyTree;

/// Binary Merkle root over `leaves` in the given order.
///
/// A lone leaf is its own root. Odd levels duplicate their last node.
pub fn compute_merkle_root(leaves: &[Digest]) -> Result<Digest, EmptyTree> {
    if leaves.is_empty() {
        return Err(EmptyTree);
    }
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| {
                let right = pair.get(1).unwrap_or(&pair[0]);
                sha256_concat(&[&pair[0].0, &right.0])
            })
            .collect();
    }
    Ok(level[0])
}
