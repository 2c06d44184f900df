//! A hybrid permissioned blockchain: stake-selected validators run a
//! leaderless PBFT round over a partitioned pub-sub broker, while a master
//! node authenticates traffic, samples validators by stake and gates each
//! phase behind a readiness barrier.
//!
//! The [`sim`] module wires everything into a reproducible harness and the
//! [`metrics`] module turns runs into per-round CSV rows and summary tables.

pub mod chain;
pub mod codec;
pub mod consensus;
pub mod cost;
pub mod crypto;
pub mod master;
pub mod mempool;
pub mod metrics;
pub mod runtime;
pub mod sim;
pub mod transport;
pub mod workload;

pub use chain::{Block, BlockHeader, LedgerState, Transaction};
pub use consensus::NodeId;
pub use crypto::{Digest, KeyPair, PublicKey};
pub use metrics::RoundMetrics;
pub use sim::{analyze, run_simulation, HarnessConfig, RunOutput, SchedulerMode};
