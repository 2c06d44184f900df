use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::consensus::{topics, AbortReason, BarrierPhase, Body, Envelope, NodeId};
use crate::crypto::{Digest, KeyPair};
use crate::runtime::{Actor, ActorClock, RunError, Step};
use crate::transport::{Broker, TimedInbox};

use super::registry::{AuthRejection, Authentication, ValidatorRegistry};
use super::selection::{plan_round, round_seed, SelectionConfig};

pub const DEFAULT_RETRY_BUDGET: u32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct MasterConfig {
    pub selection: SelectionConfig,
    pub sync_timeout_ms: u64,
    pub rounds: u64,
    /// Consecutive aborts tolerated before the run is halted.
    pub retry_budget: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RoundOutcome {
    Committed { block_hash: Digest, laggards: Vec<NodeId> },
    Aborted { reason: AbortReason, laggards: Vec<NodeId> },
    Skipped,
}

/// One audit-log line: a selection attempt and what became of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub round: u64,
    pub attempt: u32,
    pub proposals: BTreeMap<NodeId, u64>,
    pub selection: Vec<NodeId>,
    pub seed: Digest,
    pub outcome: Option<RoundOutcome>,
}

impl RoundRecord {
    pub fn write_jsonl<W: Write>(records: &[RoundRecord], mut out: W) -> io::Result<()> {
        for r in records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MasterReport {
    pub records: Vec<RoundRecord>,
    pub denied: BTreeSet<NodeId>,
    pub rejected: BTreeMap<AuthRejection, u64>,
    pub halted: bool,
    pub committed_rounds: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Proposals,
    Barrier(BarrierPhase),
    Done,
}

pub struct Master {
    cfg: MasterConfig,
    key: KeyPair,
    registry: ValidatorRegistry,
    denied: BTreeSet<NodeId>,
    broker: Arc<Broker>,
    proposals_in: TimedInbox,
    ready_in: TimedInbox,
    inbox: Vec<Envelope>,

    round: u64,
    attempt: u32,
    last_hash: Digest,
    stage: Stage,
    deadline: Option<u64>,
    proposals: BTreeMap<NodeId, u64>,
    current: Option<RoundRecord>,
    ready: BTreeMap<NodeId, Digest>,
    consecutive_aborts: u32,

    records: Vec<RoundRecord>,
    rejected: BTreeMap<AuthRejection, u64>,
    halted: bool,
    committed_rounds: u64,
}

impl std::fmt::Debug for Master {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Master")
            .field("round", &self.round)
            .field("attempt", &self.attempt)
            .field("stage", &self.stage)
            .finish_non_exhaustive()
    }
}

impl Master {
    /// Applies the stake cap to `registry` and subscribes to the inbound
    /// topics.
    pub fn new(
        cfg: MasterConfig,
        key: KeyPair,
        mut registry: ValidatorRegistry,
        broker: Arc<Broker>,
    ) -> Result<Self, RunError> {
        let denied = registry.enforce_stake_cap(cfg.selection.stake_cap_fraction);
        Ok(Self {
            proposals_in: TimedInbox::new(broker.subscribe(topics::STAKE_PROPOSALS, "master")?),
            ready_in: TimedInbox::new(broker.subscribe(topics::READY, "master")?),
            cfg,
            key,
            registry,
            denied,
            broker,
            inbox: Vec::new(),
            round: 1,
            attempt: 0,
            last_hash: Digest::ZERO,
            stage: Stage::Proposals,
            deadline: None,
            proposals: BTreeMap::new(),
            current: None,
            ready: BTreeMap::new(),
            consecutive_aborts: 0,
            records: Vec::new(),
            rejected: BTreeMap::new(),
            halted: false,
            committed_rounds: 0,
        })
    }

    pub fn registry(&self) -> &ValidatorRegistry {
        &self.registry
    }

    pub fn report(&self) -> MasterReport {
        MasterReport {
            records: self.records.clone(),
            denied: self.denied.clone(),
            rejected: self.rejected.clone(),
            halted: self.halted,
            committed_rounds: self.committed_rounds,
        }
    }

    fn broadcast(&self, clock: &ActorClock, topic: &str, body: Body) -> Result<(), RunError> {
        let env = body.seal(NodeId::MASTER, self.round, self.attempt, &self.key);
        self.broker.publish_at(topic, b"master", &env.to_bytes(), clock.now_ms())?;
        Ok(())
    }

    fn pull(&mut self, clock: &mut ActorClock) -> bool {
        let mut got = false;
        let now = clock.now_ms();
        for inbox in [&mut self.proposals_in, &mut self.ready_in] {
            inbox.fetch();
            for m in inbox.take_due(now, usize::MAX) {
                got = true;
                let Ok(env) = Envelope::from_bytes(&m.payload) else {
                    *self.rejected.entry(AuthRejection::BadSignature).or_insert(0) += 1;
                    continue;
                };
                match self.registry.authenticate(&env) {
                    Authentication::Accepted => self.inbox.push(env),
                    Authentication::Rejected(r) => *self.rejected.entry(r).or_insert(0) += 1,
                }
            }
        }
        got
    }

    fn process_inbox(&mut self, clock: &mut ActorClock) -> Result<bool, RunError> {
        let mut progressed = false;
        let pending = std::mem::take(&mut self.inbox);
        for env in pending {
            if self.stage == Stage::Done {
                break;
            }
            match env.round_key().cmp(&(self.round, self.attempt)) {
                std::cmp::Ordering::Less => continue,
                std::cmp::Ordering::Greater => {
                    self.inbox.push(env);
                    continue;
                }
                std::cmp::Ordering::Equal => {}
            }
            let Ok(body) = Body::decode(env.kind, &env.body) else {
                continue;
            };
            let in_selection = self
                .current
                .as_ref()
                .is_some_and(|r| r.selection.contains(&env.sender));
            match (body, self.stage) {
                (Body::StakeProposal { stake }, Stage::Proposals) => {
                    self.proposals.entry(env.sender).or_insert(stake);
                    if self.deadline.is_none() {
                        self.deadline = Some(clock.protocol_ms() + self.cfg.sync_timeout_ms);
                    }
                    progressed = true;
                }
                (Body::Ready { phase, digest }, Stage::Barrier(current)) if in_selection => {
                    if phase == current {
                        self.ready.entry(env.sender).or_insert(digest);
                        progressed = true;
                    } else if phase > current {
                        self.inbox.push(env);
                    }
                }
                (Body::Ready { .. }, Stage::Proposals) => self.inbox.push(env),
                (Body::AbortRequest { reason }, Stage::Barrier(_)) if in_selection => {
                    self.abort(clock, reason, Vec::new())?;
                    progressed = true;
                }
                _ => {}
            }
        }
        Ok(progressed)
    }

    fn select(&mut self, clock: &mut ActorClock) -> Result<bool, RunError> {
        let active = self.registry.active_ids();
        let all_in = !active.is_empty() && active.iter().all(|id| self.proposals.contains_key(id));
        let expired = self.deadline.is_some_and(|d| clock.protocol_ms() >= d);
        if !all_in && !expired {
            return Ok(false);
        }
        let seed = round_seed(&self.cfg.selection.seed_base, self.round, &self.last_hash, self.attempt);
        match plan_round(&self.registry, &self.proposals, &self.cfg.selection, self.round, &seed) {
            Ok((eligible, selection)) => {
                self.current = Some(RoundRecord {
                    round: self.round,
                    attempt: self.attempt,
                    proposals: eligible,
                    selection: selection.clone(),
                    seed,
                    outcome: None,
                });
                self.broadcast(clock, topics::SELECTION, Body::Selection { selected: selection, seed })?;
                self.enter_barrier(clock, BarrierPhase::PrePrepare);
            }
            Err(_) => {
                self.records.push(RoundRecord {
                    round: self.round,
                    attempt: self.attempt,
                    proposals: BTreeMap::new(),
                    selection: Vec::new(),
                    seed,
                    outcome: Some(RoundOutcome::Skipped),
                });
                self.fail_attempt(clock)?;
            }
        }
        Ok(true)
    }

    fn enter_barrier(&mut self, clock: &ActorClock, phase: BarrierPhase) {
        self.stage = Stage::Barrier(phase);
        self.ready.clear();
        self.deadline = Some(clock.protocol_ms() + self.cfg.sync_timeout_ms);
    }

    fn check_barrier(&mut self, clock: &mut ActorClock) -> Result<bool, RunError> {
        let Stage::Barrier(phase) = self.stage else {
            return Ok(false);
        };
        let selection = self.current.as_ref().map(|r| r.selection.clone()).unwrap_or_default();
        let all_ready = selection.iter().all(|id| self.ready.contains_key(id));
        let expired = self.deadline.is_some_and(|d| clock.protocol_ms() >= d);
        if !all_ready && !expired {
            return Ok(false);
        }
        let laggards: Vec<NodeId> = selection.iter().filter(|id| !self.ready.contains_key(id)).copied().collect();
        if phase != BarrierPhase::PostCommit {
            if all_ready {
                self.broadcast(clock, topics::PROCEED, Body::Proceed { phase })?;
                self.enter_barrier(clock, phase.next().expect("phase after non-final"));
            } else {
                self.abort(clock, AbortReason::BarrierTimeout, laggards)?;
            }
            return Ok(true);
        }
        // A block has been committed once anyone reports post-commit
        // readiness; late nodes recover it from the block log.
        let mut tally: BTreeMap<Digest, usize> = BTreeMap::new();
        for d in self.ready.values() {
            *tally.entry(*d).or_insert(0) += 1;
        }
        let Some((&hash, _)) = tally.iter().max_by_key(|(_, &c)| c) else {
            self.abort(clock, AbortReason::BarrierTimeout, laggards)?;
            return Ok(true);
        };
        self.broadcast(clock, topics::PROCEED, Body::Proceed { phase })?;
        if let Some(mut rec) = self.current.take() {
            rec.outcome = Some(RoundOutcome::Committed {
                block_hash: hash,
                laggards,
            });
            self.records.push(rec);
        }
        self.last_hash = hash;
        self.committed_rounds += 1;
        self.consecutive_aborts = 0;
        self.round += 1;
        self.attempt = 0;
        self.proposals.clear();
        self.deadline = None;
        self.stage = if self.round > self.cfg.rounds {
            Stage::Done
        } else {
            Stage::Proposals
        };
        Ok(true)
    }

    fn abort(&mut self, clock: &mut ActorClock, reason: AbortReason, laggards: Vec<NodeId>) -> Result<(), RunError> {
        self.broadcast(
            clock,
            topics::PROCEED,
            Body::Abort {
                reason,
                laggards: laggards.clone(),
            },
        )?;
        if let Some(mut rec) = self.current.take() {
            rec.outcome = Some(RoundOutcome::Aborted { reason, laggards });
            self.records.push(rec);
        }
        self.fail_attempt(clock)
    }

    fn fail_attempt(&mut self, clock: &mut ActorClock) -> Result<(), RunError> {
        self.consecutive_aborts += 1;
        if self.consecutive_aborts >= self.cfg.retry_budget {
            self.broadcast(clock, topics::PROCEED, Body::Halt)?;
            self.halted = true;
            self.stage = Stage::Done;
            return Ok(());
        }
        self.attempt += 1;
        self.proposals.clear();
        self.ready.clear();
        self.deadline = None;
        self.stage = Stage::Proposals;
        Ok(())
    }
}

impl Actor for Master {
    fn label(&self) -> String {
        NodeId::MASTER.to_string()
    }

    fn wake_at(&self) -> Option<f64> {
        [self.proposals_in.next_due(), self.ready_in.next_due(), self.deadline.map(|d| d as f64)]
            .into_iter()
            .flatten()
            .min_by(f64::total_cmp)
    }

    fn step(&mut self, clock: &mut ActorClock) -> Result<Step, RunError> {
        if self.stage == Stage::Done {
            return Ok(Step::Done);
        }
        let mut busy = self.pull(clock);
        loop {
            let mut progressed = self.process_inbox(clock)?;
            progressed |= match self.stage {
                Stage::Proposals => self.select(clock)?,
                Stage::Barrier(_) => self.check_barrier(clock)?,
                Stage::Done => false,
            };
            busy |= progressed;
            if !progressed {
                break;
            }
        }
        Ok(match self.stage {
            Stage::Done => Step::Done,
            _ if busy => Step::Busy,
            _ => Step::Idle,
        })
    }
}
