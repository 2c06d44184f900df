use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ConsensusPhase {
    Idle,
    Pooling,
    StakeProposed,
    Selected,
    PrePrepared,
    Prepared,
    Committed,
}

/// Inputs that move a validator between phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PhaseEvent {
    Start,
    /// The pool holds a full block candidate and the stake proposal went out.
    BlockReady,
    Selected,
    NotSelected,
    /// Own pre-prepare broadcast.
    PrePrepare,
    /// Prepare quorum observed.
    PrepareVote,
    /// Commit quorum observed and the block applied.
    CommitVote,
    /// A non-selected node applied a block committed by others.
    Adopt,
    NextRound,
    Abort,
}

impl fmt::Display for ConsensusPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for PhaseEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("event {event} is illegal in phase {phase}")]
pub struct AutomatonError {
    pub phase: ConsensusPhase,
    pub event: PhaseEvent,
}

/// Target of `(phase, event)`, or `None` for an illegal pair.
pub fn transition(phase: ConsensusPhase, event: PhaseEvent) -> Option<ConsensusPhase> {
    use ConsensusPhase as P;
    use PhaseEvent as E;
    Some(match (phase, event) {
        (P::Idle, E::Start) => P::Pooling,
        (P::Pooling, E::BlockReady) => P::StakeProposed,
        (P::StakeProposed, E::Selected) => P::Selected,
        (P::StakeProposed, E::NotSelected) => P::Pooling,
        (P::Selected, E::PrePrepare) => P::PrePrepared,
        (P::PrePrepared, E::PrepareVote) => P::Prepared,
        (P::Prepared, E::CommitVote) => P::Committed,
        (P::Pooling, E::Adopt) => P::Committed,
        (P::Committed, E::NextRound) => P::Pooling,
        (P::Idle, E::Abort) => return None,
        (_, E::Abort) => P::Pooling,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseAutomaton {
    current: ConsensusPhase,
    round: u64,
}

impl Default for PhaseAutomaton {
    fn default() -> Self {
        Self::new()
    }
}

impl PhaseAutomaton {
    pub fn new() -> Self {
        Self {
            current: ConsensusPhase::Idle,
            round: 1,
        }
    }

    pub fn current(&self) -> ConsensusPhase {
        self.current
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn step(&mut self, event: PhaseEvent) -> Result<ConsensusPhase, AutomatonError> {
        let next = transition(self.current, event).ok_or(AutomatonError {
            phase: self.current,
            event,
        })?;
        if self.current == ConsensusPhase::Committed && event == PhaseEvent::NextRound {
            self.round += 1;
        }
        self.current = next;
        Ok(next)
    }
}
