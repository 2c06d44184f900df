//! Signed envelopes and message bodies exchanged over the broker.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chain::Block;
use crate::codec::{DecodeError, Decoder, Encoder};
use crate::crypto::{self, Digest, KeyPair, PublicKey, Signature};

pub mod topics {
    pub const TRANSACTIONS: &str = "transactions";
    pub const TRAFFIC_MANIFEST: &str = "traffic-manifest";
    pub const STAKE_PROPOSALS: &str = "stake-proposals";
    pub const SELECTION: &str = "selection";
    pub const READY: &str = "ready";
    pub const PROCEED: &str = "proceed";
    pub const PREPREPARE: &str = "preprepare";
    pub const PREPARE: &str = "prepare";
    pub const COMMIT: &str = "commit";
    pub const BLOCKS: &str = "blocks";

    /// Topics carrying signed consensus envelopes.
    pub const CONSENSUS: [&str; 7] = [STAKE_PROPOSALS, SELECTION, READY, PROCEED, PREPREPARE, PREPARE, COMMIT];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    /// Identity used by the master node on its own envelopes.
    pub const MASTER: NodeId = NodeId(u32::MAX);
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == NodeId::MASTER {
            f.write_str("master")
        } else {
            write!(f, "node-{}", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BarrierPhase {
    PrePrepare,
    Prepare,
    Commit,
    PostCommit,
}

impl BarrierPhase {
    pub const ALL: [BarrierPhase; 4] = [
        BarrierPhase::PrePrepare,
        BarrierPhase::Prepare,
        BarrierPhase::Commit,
        BarrierPhase::PostCommit,
    ];

    fn tag(self) -> u8 {
        self as u8
    }

    fn from_tag(tag: u8) -> Result<Self, DecodeError> {
        Self::ALL.get(tag as usize).copied().ok_or(DecodeError::BadTag {
            field: "phase",
            tag,
        })
    }

    pub fn next(self) -> Option<BarrierPhase> {
        Self::ALL.get(self as usize + 1).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    StakeProposal = 1,
    Selection = 2,
    Ready = 3,
    Proceed = 4,
    PrePrepare = 5,
    Prepare = 6,
    Commit = 7,
    CommittedBlock = 8,
}

impl MessageKind {
    fn from_tag(tag: u8) -> Result<Self, DecodeError> {
        use MessageKind::*;
        Ok(match tag {
            1 => StakeProposal,
            2 => Selection,
            3 => Ready,
            4 => Proceed,
            5 => PrePrepare,
            6 => Prepare,
            7 => Commit,
            8 => CommittedBlock,
            _ => return Err(DecodeError::BadTag { field: "kind", tag }),
        })
    }
}

/// `{sender, round, phase, body}` plus a signature over all of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub kind: MessageKind,
    pub sender: NodeId,
    pub round: u64,
    pub attempt: u32,
    pub body: Vec<u8>,
    pub signature: Signature,
}

impl Envelope {
    fn signed_part(kind: MessageKind, sender: NodeId, round: u64, attempt: u32, body: &[u8]) -> Vec<u8> {
        let mut e = Encoder::with_capacity(body.len() + 24);
        e.u8(kind as u8).u32(sender.0).u64(round).u32(attempt).bytes(body);
        e.finish()
    }

    pub fn seal(kind: MessageKind, sender: NodeId, round: u64, attempt: u32, body: Vec<u8>, key: &KeyPair) -> Self {
        let signature = key.sign(&Self::signed_part(kind, sender, round, attempt, &body));
        Self {
            kind,
            sender,
            round,
            attempt,
            body,
            signature,
        }
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        crypto::verify(
            key,
            &Self::signed_part(self.kind, self.sender, self.round, self.attempt, &self.body),
            &self.signature,
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::with_capacity(self.body.len() + 96);
        e.u8(self.kind as u8)
            .u32(self.sender.0)
            .u64(self.round)
            .u32(self.attempt)
            .bytes(&self.body)
            .bytes(&self.signature.0);
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut d = Decoder::new(bytes);
        let env = Self {
            kind: MessageKind::from_tag(d.u8()?)?,
            sender: NodeId(d.u32()?),
            round: d.u64()?,
            attempt: d.u32()?,
            body: d.bytes()?.to_vec(),
            signature: Signature(d.array("signature")?),
        };
        d.finish()?;
        Ok(env)
    }

    pub fn round_key(&self) -> (u64, u32) {
        (self.round, self.attempt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AbortReason {
    BarrierTimeout,
    QuorumFailure,
    ProposalTimeout,
}

impl AbortReason {
    fn from_tag(tag: u8) -> Result<Self, DecodeError> {
        Ok(match tag {
            0 => AbortReason::BarrierTimeout,
            1 => AbortReason::QuorumFailure,
            2 => AbortReason::ProposalTimeout,
            _ => return Err(DecodeError::BadTag { field: "abort_reason", tag }),
        })
    }
}

/// Decoded body of an envelope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    StakeProposal { stake: u64 },
    Selection { selected: Vec<NodeId>, seed: Digest },
    /// A node is ready to enter `phase`. `digest` carries the committed block
    /// hash for the post-commit barrier and is zero otherwise.
    Ready { phase: BarrierPhase, digest: Digest },
    /// A selected node cannot reach quorum and asks the master to abort.
    AbortRequest { reason: AbortReason },
    Proceed { phase: BarrierPhase },
    Abort { reason: AbortReason, laggards: Vec<NodeId> },
    /// Retry budget exhausted; every actor stops.
    Halt,
    PrePrepare { block_hash: Digest },
    Prepare { block_hash: Digest },
    Commit { block_hash: Digest },
    CommittedBlock { block: Box<Block> },
}

impl Body {
    pub fn kind(&self) -> MessageKind {
        match self {
            Body::StakeProposal { .. } => MessageKind::StakeProposal,
            Body::Selection { .. } => MessageKind::Selection,
            Body::Ready { .. } | Body::AbortRequest { .. } => MessageKind::Ready,
            Body::Proceed { .. } | Body::Abort { .. } | Body::Halt => MessageKind::Proceed,
            Body::PrePrepare { .. } => MessageKind::PrePrepare,
            Body::Prepare { .. } => MessageKind::Prepare,
            Body::Commit { .. } => MessageKind::Commit,
            Body::CommittedBlock { .. } => MessageKind::CommittedBlock,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        match self {
            Body::StakeProposal { stake } => {
                e.u64(*stake);
            }
            Body::Selection { selected, seed } => {
                e.u32(selected.len() as u32);
                for id in selected {
                    e.u32(id.0);
                }
                e.bytes(&seed.0);
            }
            Body::Ready { phase, digest } => {
                e.u8(0).u8(phase.tag()).bytes(&digest.0);
            }
            Body::AbortRequest { reason } => {
                e.u8(1).u8(*reason as u8);
            }
            Body::Proceed { phase } => {
                e.u8(0).u8(phase.tag());
            }
            Body::Abort { reason, laggards } => {
                e.u8(1).u8(*reason as u8).u32(laggards.len() as u32);
                for id in laggards {
                    e.u32(id.0);
                }
            }
            Body::Halt => {
                e.u8(2);
            }
            Body::PrePrepare { block_hash } | Body::Prepare { block_hash } | Body::Commit { block_hash } => {
                e.bytes(&block_hash.0);
            }
            Body::CommittedBlock { block } => {
                return block.to_bytes();
            }
        }
        e.finish()
    }

    pub fn decode(kind: MessageKind, bytes: &[u8]) -> Result<Self, DecodeError> {
        if kind == MessageKind::CommittedBlock {
            return Ok(Body::CommittedBlock {
                block: Box::new(Block::from_bytes(bytes)?),
            });
        }
        let mut d = Decoder::new(bytes);
        let ids = |d: &mut Decoder<'_>| -> Result<Vec<NodeId>, DecodeError> {
            let n = d.u32()? as usize;
            (0..n).map(|_| d.u32().map(NodeId)).collect()
        };
        let body = match kind {
            MessageKind::StakeProposal => Body::StakeProposal { stake: d.u64()? },
            MessageKind::Selection => Body::Selection {
                selected: ids(&mut d)?,
                seed: Digest(d.array("seed")?),
            },
            MessageKind::Ready => match d.u8()? {
                0 => Body::Ready {
                    phase: BarrierPhase::from_tag(d.u8()?)?,
                    digest: Digest(d.array("digest")?),
                },
                1 => Body::AbortRequest {
                    reason: AbortReason::from_tag(d.u8()?)?,
                },
                tag => return Err(DecodeError::BadTag { field: "ready", tag }),
            },
            MessageKind::Proceed => match d.u8()? {
                0 => Body::Proceed {
                    phase: BarrierPhase::from_tag(d.u8()?)?,
                },
                1 => Body::Abort {
                    reason: AbortReason::from_tag(d.u8()?)?,
                    laggards: ids(&mut d)?,
                },
                2 => Body::Halt,
                tag => return Err(DecodeError::BadTag { field: "proceed", tag }),
            },
            MessageKind::PrePrepare => Body::PrePrepare {
                block_hash: Digest(d.array("block_hash")?),
            },
            MessageKind::Prepare => Body::Prepare {
                block_hash: Digest(d.array("block_hash")?),
            },
            MessageKind::Commit => Body::Commit {
                block_hash: Digest(d.array("block_hash")?),
            },
            MessageKind::CommittedBlock => unreachable!(),
        };
        d.finish()?;
        Ok(body)
    }

    pub fn seal(&self, sender: NodeId, round: u64, attempt: u32, key: &KeyPair) -> Envelope {
        Envelope::seal(self.kind(), sender, round, attempt, self.encode(), key)
    }
}

/// Unsigned notice from the traffic generator: `cumulative` transaction
/// messages have been published up to and including `round`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrafficManifest {
    pub round: u64,
    pub cumulative: u64,
}

impl TrafficManifest {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::with_capacity(16);
        e.u64(self.round).u64(self.cumulative);
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut d = Decoder::new(bytes);
        let m = Self {
            round: d.u64()?,
            cumulative: d.u64()?,
        };
        d.finish()?;
        Ok(m)
    }
}
