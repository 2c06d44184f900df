//! The per-validator PBFT round and the phase automaton that orders it.

pub mod automaton;
pub mod messages;
pub mod round;
pub mod validator;

pub use automaton::{transition, AutomatonError, ConsensusPhase, PhaseAutomaton, PhaseEvent};
pub use messages::{topics, AbortReason, BarrierPhase, Body, Envelope, MessageKind, NodeId, TrafficManifest};
pub use round::{quorum, RoundState, VoteKind, VoteOutcome};
pub use validator::{Directory, Validator, ValidatorConfig, ValidatorFaults, ValidatorReport};
