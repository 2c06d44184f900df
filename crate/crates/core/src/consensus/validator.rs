//! The validator actor: pools traffic, proposes stake, and runs the
//! barrier-gated pre-prepare, prepare and commit phases for each round.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use crate::chain::{
    apply_block, build_block, validate_block, Block, BlockParams, LedgerState, Transaction, TxRejection,
};
use crate::crypto::{Digest, KeyPair, PublicKey};
use crate::mempool::{Mempool, PoolConfig, PooledTx};
use crate::metrics::{compute_ttf, PhaseTimings, RoundMetrics};
use crate::runtime::{Actor, ActorClock, RunError, Step};
use crate::cost;
use crate::transport::{Broker, TimedInbox};

use super::automaton::{PhaseAutomaton, PhaseEvent};
use super::messages::{topics, AbortReason, BarrierPhase, Body, Envelope, MessageKind, NodeId, TrafficManifest};
use super::round::{RoundState, VoteKind, VoteOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatorConfig {
    pub node_id: NodeId,
    pub stake: u64,
    pub granularity_s: u64,
    pub pool: PoolConfig,
    pub sync_timeout_ms: u64,
    /// Rounds to commit before stopping.
    pub rounds: u64,
}

/// Faults a validator can be told to exhibit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidatorFaults {
    /// Rounds in which the node withholds its commit vote and discards its
    /// own block, so it has to recover the committed block from the log.
    pub silent_commit_rounds: BTreeSet<u64>,
}

/// Public keys of every registered participant, master included.
#[derive(Debug, Clone, Default)]
pub struct Directory {
    keys: BTreeMap<NodeId, PublicKey>,
}

impl Directory {
    pub fn new(keys: impl IntoIterator<Item = (NodeId, PublicKey)>) -> Self {
        Self {
            keys: keys.into_iter().collect(),
        }
    }

    pub fn key(&self, id: NodeId) -> Option<&PublicKey> {
        self.keys.get(&id)
    }

    /// Signature check plus the rule that only the master selects and
    /// gates phases while only validators vote.
    pub fn accepts(&self, env: &Envelope) -> bool {
        let from_master = env.sender == NodeId::MASTER;
        let master_kind = matches!(env.kind, MessageKind::Selection | MessageKind::Proceed);
        from_master == master_kind && self.key(env.sender).is_some_and(|k| env.verify(k))
    }
}

/// What a validator leaves behind after a run.
#[derive(Debug, Clone)]
pub struct ValidatorReport {
    pub node_id: NodeId,
    pub chain: Vec<Block>,
    pub ledger: LedgerState,
    pub metrics: Vec<RoundMetrics>,
    pub rejects_by_round: BTreeMap<u64, BTreeMap<TxRejection, u64>>,
    pub duplicates: u64,
    pub rejected_envelopes: u64,
    pub aborts: u64,
    pub adopted_rounds: u64,
    pub halted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Stage {
    Pooling,
    AwaitSelection,
    AwaitProceed(BarrierPhase),
    Collect(VoteKind),
    AwaitBlock { hash: Digest, adopt: bool },
    AwaitAbort,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bucket {
    PrePrepare,
    Prepare,
    Commit,
    Sync,
}

/// Splits the consensus interval into phase and synchronization time.
#[derive(Debug, Clone, Copy)]
struct RoundTimer {
    segment_start: f64,
    t: PhaseTimings,
}

impl RoundTimer {
    fn start(now: f64, pooling_ms: f64) -> Self {
        Self {
            segment_start: now,
            t: PhaseTimings {
                pooling_ms,
                ..PhaseTimings::default()
            },
        }
    }

    fn close(&mut self, bucket: Bucket, now: f64) {
        let d = (now - self.segment_start).max(0.0);
        self.segment_start = now;
        match bucket {
            Bucket::PrePrepare => self.t.preprepare_ms += d,
            Bucket::Prepare => self.t.prepare_ms += d,
            Bucket::Commit => self.t.commit_ms += d,
            Bucket::Sync => self.t.sync_ms += d,
        }
    }
}

enum Disposition {
    Handled,
    Keep,
    Drop,
}

struct Inboxes {
    txs: TimedInbox,
    manifest: TimedInbox,
    selection: TimedInbox,
    proceed: TimedInbox,
    preprepare: TimedInbox,
    prepare: TimedInbox,
    commit: TimedInbox,
}

impl Inboxes {
    fn all(&mut self) -> [&mut TimedInbox; 7] {
        [
            &mut self.txs,
            &mut self.manifest,
            &mut self.selection,
            &mut self.proceed,
            &mut self.preprepare,
            &mut self.prepare,
            &mut self.commit,
        ]
    }
}

pub struct Validator {
    cfg: ValidatorConfig,
    key: KeyPair,
    directory: Arc<Directory>,
    broker: Arc<Broker>,
    inboxes: Inboxes,
    blocks_scanned: u64,
    block_due: Option<f64>,
    faults: ValidatorFaults,

    automaton: PhaseAutomaton,
    ledger: LedgerState,
    chain: Vec<Block>,
    tip: Digest,
    pool: Mempool,

    round: u64,
    attempt: u32,
    stage: Stage,
    rs: Option<RoundState>,
    participant: bool,
    proposed: Option<(u64, u32)>,
    decided: Option<Digest>,
    inbox: Vec<Envelope>,
    deadline: Option<u64>,

    announced: BTreeMap<u64, u64>,
    consumed: u64,
    pool_round: u64,
    first_ingest: BTreeMap<u64, f64>,
    pooling_ms: BTreeMap<u64, f64>,
    timer: Option<RoundTimer>,
    candidate_publish: HashMap<Digest, f64>,

    metrics: Vec<RoundMetrics>,
    started: bool,
    halted: bool,
    duplicates: u64,
    rejected_envelopes: u64,
    aborts: u64,
    adopted_rounds: u64,
}

impl std::fmt::Debug for Validator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Validator")
            .field("node_id", &self.cfg.node_id)
            .field("round", &self.round)
            .field("attempt", &self.attempt)
            .field("stage", &self.stage)
            .finish_non_exhaustive()
    }
}

impl Validator {
    pub fn new(
        cfg: ValidatorConfig,
        key: KeyPair,
        directory: Arc<Directory>,
        broker: Arc<Broker>,
        genesis: LedgerState,
        faults: ValidatorFaults,
    ) -> Result<Self, RunError> {
        let group = format!("{}", cfg.node_id);
        let sub = |t: &str| broker.subscribe(t, &group).map(TimedInbox::new);
        let inboxes = Inboxes {
            txs: sub(topics::TRANSACTIONS)?,
            manifest: sub(topics::TRAFFIC_MANIFEST)?,
            selection: sub(topics::SELECTION)?,
            proceed: sub(topics::PROCEED)?,
            preprepare: sub(topics::PREPREPARE)?,
            prepare: sub(topics::PREPARE)?,
            commit: sub(topics::COMMIT)?,
        };
        Ok(Self {
            pool: Mempool::new(cfg.pool),
            cfg,
            key,
            directory,
            broker,
            inboxes,
            blocks_scanned: 0,
            block_due: None,
            faults,
            automaton: PhaseAutomaton::new(),
            ledger: genesis,
            chain: Vec::new(),
            tip: Digest::ZERO,
            round: 1,
            attempt: 0,
            stage: Stage::Pooling,
            rs: None,
            participant: false,
            proposed: None,
            decided: None,
            inbox: Vec::new(),
            deadline: None,
            announced: BTreeMap::new(),
            consumed: 0,
            pool_round: 1,
            first_ingest: BTreeMap::new(),
            pooling_ms: BTreeMap::new(),
            timer: None,
            candidate_publish: HashMap::new(),
            metrics: Vec::new(),
            started: false,
            halted: false,
            duplicates: 0,
            rejected_envelopes: 0,
            aborts: 0,
            adopted_rounds: 0,
        })
    }

    pub fn id(&self) -> NodeId {
        self.cfg.node_id
    }

    pub fn chain(&self) -> &[Block] {
        &self.chain
    }

    pub fn report(&self) -> ValidatorReport {
        let last = self.pool_round;
        ValidatorReport {
            node_id: self.cfg.node_id,
            chain: self.chain.clone(),
            ledger: self.ledger.clone(),
            metrics: self.metrics.clone(),
            rejects_by_round: (1..=last).map(|r| (r, self.pool.rejects_for_round(r))).collect(),
            duplicates: self.duplicates,
            rejected_envelopes: self.rejected_envelopes,
            aborts: self.aborts,
            adopted_rounds: self.adopted_rounds,
            halted: self.halted,
        }
    }

    fn protocol_error(&self, message: impl Into<String>) -> RunError {
        RunError::Protocol {
            actor: self.cfg.node_id.to_string(),
            message: message.into(),
        }
    }

    fn advance(&mut self, event: PhaseEvent) -> Result<(), RunError> {
        self.automaton
            .step(event)
            .map(|_| ())
            .map_err(|e| self.protocol_error(e.to_string()))
    }

    fn send(&self, clock: &ActorClock, topic: &str, body: Body) -> Result<(), RunError> {
        let env = body.seal(self.cfg.node_id, self.round, self.attempt, &self.key);
        self.broker
            .publish_at(topic, &self.cfg.node_id.0.to_le_bytes(), &env.to_bytes(), clock.now_ms())?;
        Ok(())
    }

    fn ready(&mut self, clock: &ActorClock, phase: BarrierPhase, digest: Digest) -> Result<(), RunError> {
        self.send(clock, topics::READY, Body::Ready { phase, digest })?;
        self.stage = Stage::AwaitProceed(phase);
        self.deadline = None;
        Ok(())
    }

    fn request_abort(&mut self, clock: &ActorClock, reason: AbortReason) -> Result<(), RunError> {
        self.send(clock, topics::READY, Body::AbortRequest { reason })?;
        self.stage = Stage::AwaitAbort;
        self.deadline = None;
        Ok(())
    }

    fn close(&mut self, bucket: Bucket, clock: &ActorClock) {
        if let Some(t) = self.timer.as_mut() {
            t.close(bucket, clock.now_ms());
        }
    }

    fn pull_consensus(&mut self, clock: &mut ActorClock) -> bool {
        let mut got = false;
        let now = clock.now_ms();
        let inboxes = &mut self.inboxes;
        for inbox in [
            &mut inboxes.selection,
            &mut inboxes.proceed,
            &mut inboxes.preprepare,
            &mut inboxes.prepare,
            &mut inboxes.commit,
        ] {
            for m in inbox.take_due(now, usize::MAX) {
                got = true;
                match Envelope::from_bytes(&m.payload) {
                    Ok(env) if self.directory.accepts(&env) => self.inbox.push(env),
                    _ => self.rejected_envelopes += 1,
                }
            }
        }
        got
    }

    fn process_inbox(&mut self, clock: &mut ActorClock) -> Result<bool, RunError> {
        let mut any = false;
        loop {
            let mut progressed = false;
            let pending = std::mem::take(&mut self.inbox);
            let mut keep = Vec::new();
            let mut iter = pending.into_iter();
            for env in iter.by_ref() {
                if self.stage == Stage::Done {
                    keep.push(env);
                    break;
                }
                match self.handle(env.clone(), clock)? {
                    Disposition::Handled => progressed = true,
                    Disposition::Keep => keep.push(env),
                    Disposition::Drop => {}
                }
            }
            keep.extend(iter);
            keep.append(&mut self.inbox);
            self.inbox = keep;
            any |= progressed;
            if !progressed {
                return Ok(any);
            }
        }
    }

    fn handle(&mut self, env: Envelope, clock: &mut ActorClock) -> Result<Disposition, RunError> {
        let body = match Body::decode(env.kind, &env.body) {
            Ok(b) => b,
            Err(_) => {
                self.rejected_envelopes += 1;
                return Ok(Disposition::Drop);
            }
        };
        if body == Body::Halt {
            self.halted = true;
            self.stage = Stage::Done;
            return Ok(Disposition::Handled);
        }
        match env.round_key().cmp(&(self.round, self.attempt)) {
            std::cmp::Ordering::Less => return Ok(Disposition::Drop),
            std::cmp::Ordering::Greater => return Ok(Disposition::Keep),
            std::cmp::Ordering::Equal => {}
        }
        match body {
            Body::Selection { selected, .. } => self.on_selection(selected, clock),
            Body::Proceed { phase } => {
                if self.stage == Stage::AwaitProceed(phase) {
                    self.on_proceed(phase, clock)?;
                    Ok(Disposition::Handled)
                } else {
                    Ok(Disposition::Keep)
                }
            }
            Body::Abort { .. } => self.on_abort(clock),
            Body::PrePrepare { block_hash } => self.on_vote(VoteKind::PrePrepare, env.sender, block_hash, clock),
            Body::Prepare { block_hash } => self.on_vote(VoteKind::Prepare, env.sender, block_hash, clock),
            Body::Commit { block_hash } => self.on_vote(VoteKind::Commit, env.sender, block_hash, clock),
            _ => Ok(Disposition::Drop),
        }
    }

    fn on_selection(&mut self, selected: Vec<NodeId>, clock: &mut ActorClock) -> Result<Disposition, RunError> {
        if self.rs.is_some() {
            return Ok(Disposition::Drop);
        }
        let me = self.cfg.node_id;
        self.rs = Some(RoundState::new(self.round, self.attempt, selected.iter().copied()));
        if self.stage == Stage::AwaitSelection && selected.contains(&me) {
            self.advance(PhaseEvent::Selected)?;
            self.participant = true;
            self.close(Bucket::Sync, clock);
            self.ready(clock, BarrierPhase::PrePrepare, Digest::ZERO)?;
        } else {
            if self.stage == Stage::AwaitSelection {
                self.advance(PhaseEvent::NotSelected)?;
                self.stage = Stage::Pooling;
            }
            self.participant = false;
            self.timer = None;
            self.check_follower_quorum();
        }
        Ok(Disposition::Handled)
    }

    fn on_abort(&mut self, clock: &mut ActorClock) -> Result<Disposition, RunError> {
        if self.chain.len() as u64 >= self.round {
            return Ok(Disposition::Drop);
        }
        self.aborts += 1;
        if self.automaton.current() != super::automaton::ConsensusPhase::Pooling {
            self.advance(PhaseEvent::Abort)?;
        }
        self.close(Bucket::Sync, clock);
        self.pool.restore();
        self.rs = None;
        self.participant = false;
        self.decided = None;
        self.deadline = None;
        self.attempt += 1;
        self.stage = Stage::Pooling;
        Ok(Disposition::Handled)
    }

    fn on_vote(
        &mut self,
        kind: VoteKind,
        sender: NodeId,
        hash: Digest,
        clock: &mut ActorClock,
    ) -> Result<Disposition, RunError> {
        let Some(rs) = self.rs.as_mut() else {
            return Ok(Disposition::Keep);
        };
        match rs.record(kind, sender, hash) {
            VoteOutcome::Duplicate => self.duplicates += 1,
            VoteOutcome::NotSelected => self.rejected_envelopes += 1,
            VoteOutcome::Recorded => {}
        }
        if self.participant {
            self.check_collect(clock)?;
        } else {
            self.check_follower_quorum();
        }
        Ok(Disposition::Handled)
    }

    fn check_follower_quorum(&mut self) {
        if self.participant || !matches!(self.stage, Stage::Pooling) {
            return;
        }
        if let Some(hash) = self.rs.as_ref().and_then(|rs| rs.quorum_hash(VoteKind::Commit)) {
            self.stage = Stage::AwaitBlock { hash, adopt: true };
        }
    }

    fn check_collect(&mut self, clock: &mut ActorClock) -> Result<(), RunError> {
        let Stage::Collect(kind) = self.stage else {
            return Ok(());
        };
        let rs = self.rs.as_ref().expect("collecting without round state");
        let timed_out = self.deadline.is_some_and(|d| clock.protocol_ms() >= d);
        match kind {
            VoteKind::PrePrepare => {
                if rs.all_received(kind) || timed_out {
                    self.close(Bucket::PrePrepare, clock);
                    self.ready(clock, BarrierPhase::Prepare, Digest::ZERO)?;
                }
            }
            VoteKind::Prepare => {
                if let Some(h) = rs.quorum_hash(kind) {
                    self.advance(PhaseEvent::PrepareVote)?;
                    self.decided = Some(h);
                    self.close(Bucket::Prepare, clock);
                    self.ready(clock, BarrierPhase::Commit, Digest::ZERO)?;
                } else if rs.quorum_impossible(kind) || timed_out {
                    self.close(Bucket::Prepare, clock);
                    self.request_abort(clock, AbortReason::QuorumFailure)?;
                }
            }
            VoteKind::Commit => {
                if let Some(h) = rs.quorum_hash(kind) {
                    let own = rs.local_block.as_ref().filter(|b| b.hash() == h).cloned();
                    match own {
                        Some(block) => self.apply_committed(block, false, clock)?,
                        None => self.stage = Stage::AwaitBlock { hash: h, adopt: false },
                    }
                } else if rs.quorum_impossible(kind) || timed_out {
                    self.close(Bucket::Commit, clock);
                    self.request_abort(clock, AbortReason::QuorumFailure)?;
                }
            }
        }
        Ok(())
    }

    fn on_proceed(&mut self, phase: BarrierPhase, clock: &mut ActorClock) -> Result<(), RunError> {
        self.close(Bucket::Sync, clock);
        let deadline = clock.protocol_ms() + self.cfg.sync_timeout_ms;
        match phase {
            BarrierPhase::PrePrepare => {
                let candidates = self
                    .pool
                    .drain_block_candidates()
                    .map_err(|e| self.protocol_error(e.to_string()))?;
                self.candidate_publish = candidates.iter().map(|p| (p.id, p.publish_time)).collect();
                let txs: Vec<Transaction> = candidates.into_iter().map(|p| p.tx).collect();
                let params = BlockParams {
                    block_size: self.cfg.pool.block_size,
                    granularity_s: self.cfg.granularity_s,
                };
                let block = build_block(txs, self.tip, self.round, clock.wall_ms(), params)
                    .map_err(|e| self.protocol_error(e.to_string()))?;
                let hash = block.hash();
                self.advance(PhaseEvent::PrePrepare)?;
                let rs = self.rs.as_mut().expect("selected without round state");
                rs.local_block = Some(block);
                self.send(clock, topics::PREPREPARE, Body::PrePrepare { block_hash: hash })?;
                self.stage = Stage::Collect(VoteKind::PrePrepare);
            }
            BarrierPhase::Prepare => {
                let rs = self.rs.as_ref().expect("selected without round state");
                let own = rs.local_block.as_ref().map(Block::hash).unwrap_or(Digest::ZERO);
                let target = rs.plurality_hash(own);
                if target == own {
                    let block = rs.local_block.as_ref().expect("own block");
                    if let Err(v) = validate_block(block, &self.ledger, &self.tip, self.cfg.granularity_s) {
                        return Err(self.protocol_error(format!("own block failed validation: {v:?}")));
                    }
                }
                self.send(clock, topics::PREPARE, Body::Prepare { block_hash: target })?;
                self.stage = Stage::Collect(VoteKind::Prepare);
            }
            BarrierPhase::Commit => {
                let decided = self.decided.expect("commit without prepare quorum");
                if self.faults.silent_commit_rounds.contains(&self.round) {
                    self.rs.as_mut().unwrap().local_block = None;
                } else {
                    self.send(clock, topics::COMMIT, Body::Commit { block_hash: decided })?;
                }
                self.stage = Stage::Collect(VoteKind::Commit);
            }
            BarrierPhase::PostCommit => {
                self.finish_round(clock)?;
                return Ok(());
            }
        }
        self.deadline = Some(deadline);
        self.check_collect(clock)
    }

    fn apply_committed(&mut self, block: Block, adopt: bool, clock: &mut ActorClock) -> Result<(), RunError> {
        let own = !adopt
            && self
                .rs
                .as_ref()
                .and_then(|rs| rs.local_block.as_ref())
                .is_some_and(|b| b.hash() == block.hash());
        let next = if own {
            apply_block(&self.ledger, &block).map_err(|e| self.protocol_error(e.to_string()))?
        } else {
            validate_block(&block, &self.ledger, &self.tip, self.cfg.granularity_s)
                .map_err(|v| self.protocol_error(format!("committed block invalid: {v:?}")))?;
            apply_block(&self.ledger, &block).map_err(|e| self.protocol_error(e.to_string()))?
        };
        self.ledger = next;
        let ids: HashSet<Digest> = block.transactions.iter().map(Transaction::id).collect();
        self.pool.commit(&self.ledger, &ids);
        let hash = block.hash();
        if own {
            let env = Body::CommittedBlock {
                block: Box::new(block.clone()),
            }
            .seal(self.cfg.node_id, self.round, self.attempt, &self.key);
            self.broker
                .publish_at(topics::BLOCKS, &self.round.to_le_bytes(), &env.to_bytes(), clock.now_ms())?;
        }
        self.tip = hash;
        self.chain.push(block);
        if adopt {
            self.advance(PhaseEvent::Adopt)?;
            self.adopted_rounds += 1;
            self.next_round()?;
        } else {
            self.advance(PhaseEvent::CommitVote)?;
            self.close(Bucket::Commit, clock);
            self.ready(clock, BarrierPhase::PostCommit, hash)?;
        }
        Ok(())
    }

    fn finish_round(&mut self, clock: &mut ActorClock) -> Result<(), RunError> {
        let now = clock.now_ms();
        let block = self.chain.last().expect("post-commit without block");
        let publish: Vec<f64> = block
            .transactions
            .iter()
            .filter_map(|tx| self.candidate_publish.get(&tx.id()).copied())
            .collect();
        if let Some(mut timer) = self.timer.take() {
            timer.t.ttf_ms = compute_ttf(now, &publish).unwrap_or(0.0);
            timer.t.verified = self.pool.verified_count(self.round);
            timer.t.failed = self.pool.failed_count(self.round);
            let row = RoundMetrics::from_timings(self.round, &timer.t, self.cfg.pool.block_size)
                .map_err(|e| self.protocol_error(e.to_string()))?;
            self.metrics.push(row);
        }
        self.next_round()
    }

    fn next_round(&mut self) -> Result<(), RunError> {
        self.advance(PhaseEvent::NextRound)?;
        self.round += 1;
        self.attempt = 0;
        self.rs = None;
        self.participant = false;
        self.decided = None;
        self.deadline = None;
        self.candidate_publish.clear();
        self.stage = if self.round > self.cfg.rounds {
            Stage::Done
        } else {
            Stage::Pooling
        };
        Ok(())
    }

    fn ingest(&mut self, clock: &mut ActorClock) -> Result<bool, RunError> {
        let mut got = false;
        let now = clock.now_ms();
        for m in self.inboxes.manifest.take_due(now, usize::MAX) {
            got = true;
            if let Ok(man) = TrafficManifest::from_bytes(&m.payload) {
                self.announced.insert(man.round, man.cumulative);
            }
        }
        let batch = self.inboxes.txs.take_due(now, self.cfg.pool.batch_size);
        if batch.is_empty() {
            return Ok(got);
        }
        self.consumed += batch.len() as u64;
        self.first_ingest.entry(self.pool_round).or_insert_with(|| clock.now_ms());
        let pooled: Vec<PooledTx> = batch
            .iter()
            .filter_map(|m| Transaction::from_bytes(&m.payload).ok().map(|tx| PooledTx::new(tx, m.publish_time)))
            .collect();
        self.pool.ingest_batch(&self.ledger, pooled);
        Ok(true)
    }

    fn traffic_complete(&self, round: u64) -> bool {
        self.announced.get(&round).is_some_and(|&c| self.consumed >= c)
    }

    fn try_block_ready(&mut self, clock: &mut ActorClock) -> Result<bool, RunError> {
        if self.stage != Stage::Pooling
            || self.proposed == Some((self.round, self.attempt))
            || self.rs.is_some()
            || !self.pool.is_ready()
            || !self.traffic_complete(self.round)
        {
            return Ok(false);
        }
        let now = clock.now_ms();
        if !self.pooling_ms.contains_key(&self.round) {
            let start = self.first_ingest.get(&self.round).copied().unwrap_or(now);
            self.pooling_ms.insert(self.round, now - start);
        }
        if self.pool_round == self.round {
            self.pool_round += 1;
            self.pool.set_round(self.pool_round);
        }
        self.advance(PhaseEvent::BlockReady)?;
        if self.timer.is_none() {
            self.timer = Some(RoundTimer::start(now, self.pooling_ms[&self.round]));
        }
        self.proposed = Some((self.round, self.attempt));
        self.send(clock, topics::STAKE_PROPOSALS, Body::StakeProposal { stake: self.cfg.stake })?;
        self.stage = Stage::AwaitSelection;
        Ok(true)
    }

    fn try_fetch_block(&mut self, clock: &mut ActorClock) -> Result<bool, RunError> {
        let Stage::AwaitBlock { hash, adopt } = self.stage else {
            return Ok(false);
        };
        let msgs = self.broker.replay(topics::BLOCKS, self.blocks_scanned)?;
        let mut found = None;
        self.block_due = None;
        for m in &msgs {
            let Ok(env) = Envelope::from_bytes(&m.payload) else {
                self.blocks_scanned += 1;
                continue;
            };
            if env.kind != MessageKind::CommittedBlock || env.round != self.round || !self.directory.accepts(&env) {
                self.blocks_scanned += 1;
                continue;
            }
            if let Ok(Body::CommittedBlock { block }) = Body::decode(env.kind, &env.body) {
                if block.hash() == hash {
                    if m.deliver_at > clock.now_ms() {
                        self.block_due = Some(m.deliver_at);
                        break;
                    }
                    cost::charge_message(m.payload.len());
                    self.blocks_scanned += 1;
                    found = Some(*block);
                    break;
                }
            }
            self.blocks_scanned += 1;
        }
        match found {
            Some(block) => {
                self.apply_committed(block, adopt, clock)?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    fn check_timeouts(&mut self, clock: &mut ActorClock) -> Result<(), RunError> {
        if self.deadline.is_some_and(|d| clock.protocol_ms() >= d) {
            self.check_collect(clock)?;
        }
        Ok(())
    }
}

impl Actor for Validator {
    fn label(&self) -> String {
        self.cfg.node_id.to_string()
    }

    fn wake_at(&self) -> Option<f64> {
        let inboxes = &self.inboxes;
        [
            &inboxes.txs,
            &inboxes.manifest,
            &inboxes.selection,
            &inboxes.proceed,
            &inboxes.preprepare,
            &inboxes.prepare,
            &inboxes.commit,
        ]
        .into_iter()
        .filter_map(TimedInbox::next_due)
        .chain(self.deadline.map(|d| d as f64))
        .chain(self.block_due)
        .min_by(f64::total_cmp)
    }

    fn step(&mut self, clock: &mut ActorClock) -> Result<Step, RunError> {
        if !self.started {
            self.started = true;
            self.advance(PhaseEvent::Start)?;
            self.pool.set_round(self.pool_round);
        }
        if self.stage == Stage::Done {
            return Ok(Step::Done);
        }
        for inbox in self.inboxes.all() {
            inbox.fetch();
        }
        let mut busy = self.pull_consensus(clock);
        busy |= self.process_inbox(clock)?;
        self.check_timeouts(clock)?;
        busy |= self.try_fetch_block(clock)?;
        if self.stage != Stage::Done {
            busy |= self.ingest(clock)?;
            busy |= self.try_block_ready(clock)?;
        }
        Ok(match self.stage {
            Stage::Done => Step::Done,
            _ if busy => Step::Busy,
            _ => Step::Idle,
        })
    }
}
