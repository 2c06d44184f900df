use std::collections::{BTreeMap, BTreeSet};

use crate::chain::Block;
use crate::crypto::Digest;

use super::messages::NodeId;

/// Votes needed among `k` selected validators.
pub fn quorum(k: usize) -> usize {
    2 * k / 3 + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteOutcome {
    Recorded,
    Duplicate,
    NotSelected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteKind {
    PrePrepare,
    Prepare,
    Commit,
}

#[derive(Debug, Clone)]
pub struct RoundState {
    pub round: u64,
    pub attempt: u32,
    pub selected: BTreeSet<NodeId>,
    pub local_block: Option<Block>,
    pub preprepare_hashes: BTreeMap<NodeId, Digest>,
    pub prepare_votes: BTreeMap<NodeId, Digest>,
    pub commit_votes: BTreeMap<NodeId, Digest>,
    pub quorum: usize,
    pub duplicates: u64,
}

impl RoundState {
    pub fn new(round: u64, attempt: u32, selected: impl IntoIterator<Item = NodeId>) -> Self {
        let selected: BTreeSet<NodeId> = selected.into_iter().collect();
        Self {
            round,
            attempt,
            quorum: quorum(selected.len()),
            selected,
            local_block: None,
            preprepare_hashes: BTreeMap::new(),
            prepare_votes: BTreeMap::new(),
            commit_votes: BTreeMap::new(),
            duplicates: 0,
        }
    }

    pub fn votes(&self, kind: VoteKind) -> &BTreeMap<NodeId, Digest> {
        match kind {
            VoteKind::PrePrepare => &self.preprepare_hashes,
            VoteKind::Prepare => &self.prepare_votes,
            VoteKind::Commit => &self.commit_votes,
        }
    }

    /// First message per node and kind wins.
    pub fn record(&mut self, kind: VoteKind, node: NodeId, hash: Digest) -> VoteOutcome {
        if !self.selected.contains(&node) {
            return VoteOutcome::NotSelected;
        }
        let map = match kind {
            VoteKind::PrePrepare => &mut self.preprepare_hashes,
            VoteKind::Prepare => &mut self.prepare_votes,
            VoteKind::Commit => &mut self.commit_votes,
        };
        if map.contains_key(&node) {
            self.duplicates += 1;
            return VoteOutcome::Duplicate;
        }
        map.insert(node, hash);
        VoteOutcome::Recorded
    }

    /// Most frequent pre-prepare hash; `own` wins any tie it takes part in,
    /// otherwise the smallest hash among the tied.
    pub fn plurality_hash(&self, own: Digest) -> Digest {
        let tally = tally(&self.preprepare_hashes);
        let Some(&best) = tally.values().max() else {
            return own;
        };
        if tally.get(&own) == Some(&best) {
            return own;
        }
        *tally.iter().find(|(_, &c)| c == best).map(|(h, _)| h).expect("non-empty")
    }

    /// Hash backed by at least `quorum` votes of `kind`.
    pub fn quorum_hash(&self, kind: VoteKind) -> Option<Digest> {
        tally(self.votes(kind))
            .into_iter()
            .find(|&(_, c)| c >= self.quorum)
            .map(|(h, _)| h)
    }

    /// No hash can reach quorum even if every missing vote agrees with the
    /// current leader.
    pub fn quorum_impossible(&self, kind: VoteKind) -> bool {
        let votes = self.votes(kind);
        let missing = self.selected.len() - votes.len();
        let best = tally(votes).values().copied().max().unwrap_or(0);
        best + missing < self.quorum
    }

    pub fn all_received(&self, kind: VoteKind) -> bool {
        self.votes(kind).len() == self.selected.len()
    }
}

fn tally(votes: &BTreeMap<NodeId, Digest>) -> BTreeMap<Digest, usize> {
    let mut t = BTreeMap::new();
    for h in votes.values() {
        *t.entry(*h).or_insert(0) += 1;
    }
    t
}
