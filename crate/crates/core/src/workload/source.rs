use std::sync::Arc;

use crate::chain::Transaction;
use crate::consensus::{topics, Body, Envelope, MessageKind, NodeId, TrafficManifest};
use crate::crypto::PublicKey;
use crate::runtime::{Actor, ActorClock, RunError, Step};
use crate::cost;
use crate::transport::{Broker, BrokerError, TimedInbox};

use super::generator::{InjectionLog, TrafficGenerator};
use super::schedule::FraudSchedule;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    pub user_count: usize,
    pub rounds: u64,
    pub txs_per_block: usize,
    pub batch_size: usize,
    pub fraud_schedule: FraudSchedule,
    pub rng_seed: u64,
}

/// Publishes every batch keyed by sender, stamping each batch with the
/// publisher's clock. Returns the number of messages published.
pub fn publish_traffic(broker: &Broker, batches: &[Vec<Transaction>], clock: &ActorClock) -> Result<u64, BrokerError> {
    let mut n = 0;
    for batch in batches {
        let t = clock.now_ms();
        for tx in batch {
            broker.publish_at(topics::TRANSACTIONS, &tx.sender().0, &tx.to_bytes(), t)?;
            n += 1;
        }
    }
    Ok(n)
}

/// The traffic actor. Round 1 goes out immediately; round `r + 1` goes out
/// once the master announces the first selection of round `r`, so the next
/// block's transactions arrive while the current one is in consensus.
pub struct TrafficSource {
    generator: TrafficGenerator,
    rounds: u64,
    broker: Arc<Broker>,
    master_key: PublicKey,
    selection: TimedInbox,
    proceed: TimedInbox,
    next_round: u64,
    published: u64,
    halted: bool,
}

impl std::fmt::Debug for TrafficSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrafficSource")
            .field("next_round", &self.next_round)
            .field("published", &self.published)
            .finish_non_exhaustive()
    }
}

impl TrafficSource {
    pub fn new(
        generator: TrafficGenerator,
        rounds: u64,
        broker: Arc<Broker>,
        master_key: PublicKey,
    ) -> Result<Self, RunError> {
        Ok(Self {
            selection: TimedInbox::new(broker.subscribe(topics::SELECTION, "workload")?),
            proceed: TimedInbox::new(broker.subscribe(topics::PROCEED, "workload")?),
            generator,
            rounds,
            broker,
            master_key,
            next_round: 1,
            published: 0,
            halted: false,
        })
    }

    pub fn log(&self) -> &InjectionLog {
        self.generator.log()
    }

    pub fn schedule(&self) -> &FraudSchedule {
        self.generator.schedule()
    }

    pub fn published(&self) -> u64 {
        self.published
    }

    pub fn halted(&self) -> bool {
        self.halted
    }

    fn publish_round(&mut self, clock: &ActorClock) -> Result<(), RunError> {
        let round = self.next_round;
        let batches = self.generator.generate_round_traffic(round, clock.wall_ms());
        self.published += publish_traffic(&self.broker, &batches, clock)?;
        let manifest = TrafficManifest {
            round,
            cumulative: self.published,
        };
        self.broker
            .publish_at(topics::TRAFFIC_MANIFEST, b"manifest", &manifest.to_bytes(), clock.now_ms())?;
        self.next_round += 1;
        Ok(())
    }

    fn master_message(&self, payload: &[u8]) -> Option<(Envelope, Body)> {
        let env = Envelope::from_bytes(payload).ok()?;
        if env.sender != NodeId::MASTER || !env.verify(&self.master_key) {
            return None;
        }
        let body = Body::decode(env.kind, &env.body).ok()?;
        Some((env, body))
    }
}

impl Actor for TrafficSource {
    fn label(&self) -> String {
        "workload".into()
    }

    /// Clients sign and send on their own hardware, so none of this work is
    /// charged to the simulated clock.
    fn step(&mut self, clock: &mut ActorClock) -> Result<Step, RunError> {
        cost::untracked(|| self.serve(clock))
    }

    fn wake_at(&self) -> Option<f64> {
        [self.proceed.next_due(), self.selection.next_due()]
            .into_iter()
            .flatten()
            .min_by(f64::total_cmp)
    }
}

impl TrafficSource {
    fn serve(&mut self, clock: &mut ActorClock) -> Result<Step, RunError> {
        if self.halted || self.next_round > self.rounds {
            return Ok(Step::Done);
        }
        let mut busy = false;
        let now = clock.now_ms();
        self.proceed.fetch();
        self.selection.fetch();
        for m in self.proceed.take_due(now, usize::MAX) {
            if let Some((_, Body::Halt)) = self.master_message(&m.payload) {
                self.halted = true;
                return Ok(Step::Done);
            }
        }
        if self.next_round == 1 {
            self.publish_round(clock)?;
            busy = true;
        }
        for m in self.selection.take_due(now, usize::MAX) {
            let Some((env, _)) = self.master_message(&m.payload) else {
                continue;
            };
            if env.kind == MessageKind::Selection
                && env.attempt == 0
                && env.round + 1 == self.next_round
                && self.next_round <= self.rounds
            {
                self.publish_round(clock)?;
                busy = true;
            }
        }
        Ok(if self.next_round > self.rounds {
            Step::Done
        } else if busy {
            Step::Busy
        } else {
            Step::Idle
        })
    }
}
