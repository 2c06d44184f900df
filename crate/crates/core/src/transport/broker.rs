//! In-process partitioned pub-sub log.
//!
//! Topics hold a fixed number of append-only partitions. A message lands in
//! partition `H(key) mod partitions`, so equal keys keep FIFO order. Producer
//! batching is emulated by lagging a per-partition visibility watermark behind
//! the log end until `linger_ms` elapses, `min_batch_bytes` accumulate or a
//! flush is forced. Consumer groups share partitions between members and keep
//! committed positions per partition; separate groups each see every message.

use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cost;
use crate::crypto::sha256;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BrokerError {
    #[error("topic `{0}` already exists")]
    DuplicateTopic(String),
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("topic `{0}` needs at least one partition")]
    NoPartitions(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AckMode {
    /// Leader-only acknowledgement (`acks=1`).
    #[default]
    Leader,
    All,
}

/// Kept for configuration parity; messages are never compressed in process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Compression {
    None,
    #[default]
    Lz4,
}

/// How held-back batches become visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Visibility {
    /// Batches are released once `linger_ms` of real time passes.
    #[default]
    Timed,
    /// Only the byte threshold or an explicit flush releases a batch. Used by
    /// the deterministic scheduler, which flushes between steps. Linger is
    /// then expressed in publisher time instead: a message's `deliver_at` is
    /// pushed out to the end of its partition's open batch unless the batch
    /// reaches `min_batch_bytes`.
    Manual,
}

/// Uniform per-delivery delay added on top of the publish time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyInjection {
    pub min_ms: f64,
    pub max_ms: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrokerConfig {
    pub partitions_per_topic: u32,
    pub linger_ms: u64,
    pub min_batch_bytes: usize,
    pub ack_mode: AckMode,
    pub compression: Compression,
    /// Informational; the in-process broker is a single node.
    pub broker_count: u32,
    pub visibility: Visibility,
    pub latency: Option<LatencyInjection>,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self {
            partitions_per_topic: 5,
            linger_ms: 10,
            min_batch_bytes: 64_000,
            ack_mode: AckMode::Leader,
            compression: Compression::Lz4,
            broker_count: 1,
            visibility: Visibility::Timed,
            latency: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub topic: Arc<str>,
    pub key: Arc<[u8]>,
    pub payload: Arc<[u8]>,
    pub partition: u32,
    pub offset: u64,
    /// Milliseconds on the publisher's clock.
    pub publish_time: f64,
    /// `publish_time` plus any injected latency.
    pub deliver_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ack {
    pub partition: u32,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicHandle {
    pub name: String,
    pub partitions: u32,
}

#[derive(Default)]
struct Partition {
    log: Vec<(u64, Message)>,
    visible: usize,
    pending_bytes: usize,
    pending_since: Option<Instant>,
    /// Publisher time at which the open virtual-time batch started.
    batch_open: Option<f64>,
    batch_bytes: usize,
}

impl Partition {
    fn release(&mut self) -> bool {
        let changed = self.visible < self.log.len();
        self.visible = self.log.len();
        self.pending_bytes = 0;
        self.pending_since = None;
        changed
    }
}

#[derive(Default)]
struct Group {
    positions: Vec<u64>,
    members: Vec<u64>,
}

impl Group {
    fn assigned(&self, member: u64) -> Vec<usize> {
        let Some(idx) = self.members.iter().position(|&m| m == member) else {
            return Vec::new();
        };
        (0..self.positions.len())
            .filter(|p| p % self.members.len() == idx)
            .collect()
    }
}

struct Topic {
    partitions: Vec<Partition>,
    groups: BTreeMap<String, Group>,
    next_seq: u64,
}

struct Inner {
    topics: BTreeMap<String, Topic>,
    next_member: u64,
    latency_rng: Option<ChaCha8Rng>,
    generation: u64,
}

pub struct Broker {
    config: BrokerConfig,
    inner: Mutex<Inner>,
    activity: Condvar,
    epoch: Instant,
}

impl std::fmt::Debug for Broker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Broker").field("config", &self.config).finish_non_exhaustive()
    }
}

fn partition_for(key: &[u8], partitions: u32) -> u32 {
    (sha256(key).prefix_u64() % partitions as u64) as u32
}

impl Broker {
    pub fn new(config: BrokerConfig) -> Arc<Self> {
        let latency_rng = config.latency.map(|l| ChaCha8Rng::seed_from_u64(l.seed));
        Arc::new(Self {
            config,
            inner: Mutex::new(Inner {
                topics: BTreeMap::new(),
                next_member: 0,
                latency_rng,
                generation: 0,
            }),
            activity: Condvar::new(),
            epoch: Instant::now(),
        })
    }

    pub fn config(&self) -> &BrokerConfig {
        &self.config
    }

    /// Milliseconds since the broker started, on the monotonic clock.
    pub fn now_ms(&self) -> f64 {
        self.epoch.elapsed().as_secs_f64() * 1000.0
    }

    pub fn epoch(&self) -> Instant {
        self.epoch
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().expect("broker lock poisoned")
    }

    pub fn create_topic(&self, name: &str, partitions: u32) -> Result<TopicHandle, BrokerError> {
        if partitions == 0 {
            return Err(BrokerError::NoPartitions(name.to_string()));
        }
        let mut inner = self.lock();
        if inner.topics.contains_key(name) {
            return Err(BrokerError::DuplicateTopic(name.to_string()));
        }
        inner.topics.insert(
            name.to_string(),
            Topic {
                partitions: (0..partitions).map(|_| Partition::default()).collect(),
                groups: BTreeMap::new(),
                next_seq: 0,
            },
        );
        Ok(TopicHandle {
            name: name.to_string(),
            partitions,
        })
    }

    pub fn partitions(&self, topic: &str) -> Result<u32, BrokerError> {
        let inner = self.lock();
        let t = inner
            .topics
            .get(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        Ok(t.partitions.len() as u32)
    }

    /// Publishes stamped with the broker's own clock.
    pub fn publish(&self, topic: &str, key: &[u8], payload: &[u8]) -> Result<Ack, BrokerError> {
        self.publish_at(topic, key, payload, self.now_ms())
    }

    /// Publishes with an explicit publisher timestamp in milliseconds.
    pub fn publish_at(
        &self,
        topic: &str,
        key: &[u8],
        payload: &[u8],
        publish_time: f64,
    ) -> Result<Ack, BrokerError> {
        cost::charge_message(key.len() + payload.len());
        let linger_ms = self.config.linger_ms;
        let min_batch = self.config.min_batch_bytes;
        let timed = self.config.visibility == Visibility::Timed;
        let latency = self.config.latency;

        let mut inner = self.lock();
        let delay = match (latency, inner.latency_rng.as_mut()) {
            (Some(l), Some(rng)) if l.max_ms > l.min_ms => rng.gen_range(l.min_ms..l.max_ms),
            (Some(l), _) => l.min_ms,
            _ => 0.0,
        };
        let t = inner
            .topics
            .get_mut(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        let partition = partition_for(key, t.partitions.len() as u32);
        let seq = t.next_seq;
        t.next_seq += 1;
        let name: Arc<str> = Arc::from(topic);
        let p = &mut t.partitions[partition as usize];
        let offset = p.log.len() as u64;
        let size = key.len() + payload.len();
        let mut deliver_at = publish_time + delay;
        if !timed && linger_ms > 0 {
            let linger = linger_ms as f64;
            let open = match p.batch_open {
                Some(o) if publish_time < o + linger => o,
                _ => {
                    p.batch_bytes = 0;
                    publish_time
                }
            };
            p.batch_bytes += size;
            if p.batch_bytes >= min_batch {
                p.batch_open = None;
            } else {
                p.batch_open = Some(open);
                deliver_at = deliver_at.max(open + linger);
            }
        }
        p.log.push((
            seq,
            Message {
                topic: name,
                key: Arc::from(key),
                payload: Arc::from(payload),
                partition,
                offset,
                publish_time,
                deliver_at,
            },
        ));
        let released = if linger_ms == 0 {
            p.release()
        } else {
            p.pending_bytes += size;
            if p.pending_bytes >= min_batch {
                p.release()
            } else {
                if timed && p.pending_since.is_none() {
                    p.pending_since = Some(Instant::now());
                }
                false
            }
        };
        if released {
            inner.generation += 1;
            drop(inner);
            self.activity.notify_all();
        }
        // Single in-process replica: leader and full acknowledgement coincide.
        Ok(Ack { partition, offset })
    }

    /// Makes every held-back message visible.
    pub fn flush(&self) {
        let mut inner = self.lock();
        let mut changed = false;
        for t in inner.topics.values_mut() {
            for p in &mut t.partitions {
                changed |= p.release();
            }
        }
        if changed {
            inner.generation += 1;
            drop(inner);
            self.activity.notify_all();
        }
    }

    fn release_expired(&self, inner: &mut Inner) {
        if self.config.visibility != Visibility::Timed {
            return;
        }
        let linger = Duration::from_millis(self.config.linger_ms);
        let mut changed = false;
        for t in inner.topics.values_mut() {
            for p in &mut t.partitions {
                if p.pending_since.is_some_and(|s| s.elapsed() >= linger) {
                    changed |= p.release();
                }
            }
        }
        if changed {
            inner.generation += 1;
        }
    }

    pub fn subscribe(self: &Arc<Self>, topic: &str, group: &str) -> Result<Consumer, BrokerError> {
        let mut inner = self.lock();
        let member = inner.next_member;
        inner.next_member += 1;
        let t = inner
            .topics
            .get_mut(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        let n = t.partitions.len();
        let g = t.groups.entry(group.to_string()).or_insert_with(|| Group {
            positions: vec![0; n],
            members: Vec::new(),
        });
        g.members.push(member);
        Ok(Consumer {
            broker: Arc::clone(self),
            topic: topic.to_string(),
            group: group.to_string(),
            member,
            cursor: 0,
        })
    }

    fn leave(&self, topic: &str, group: &str, member: u64) {
        let mut inner = self.lock();
        if let Some(g) = inner.topics.get_mut(topic).and_then(|t| t.groups.get_mut(group)) {
            g.members.retain(|&m| m != member);
        }
    }

    /// Visible messages with offset `>= from_offset` in every partition, in
    /// publish order. Consumer positions are not touched.
    pub fn replay(&self, topic: &str, from_offset: u64) -> Result<Vec<Message>, BrokerError> {
        let mut inner = self.lock();
        self.release_expired(&mut inner);
        let t = inner
            .topics
            .get(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        let mut out: Vec<&(u64, Message)> = t
            .partitions
            .iter()
            .flat_map(|p| p.log[..p.visible].iter().skip(from_offset as usize))
            .collect();
        out.sort_by_key(|(seq, _)| *seq);
        Ok(out.into_iter().map(|(_, m)| m.clone()).collect())
    }

    /// Total visible messages in `topic`.
    pub fn visible_len(&self, topic: &str) -> Result<u64, BrokerError> {
        let inner = self.lock();
        let t = inner
            .topics
            .get(topic)
            .ok_or_else(|| BrokerError::UnknownTopic(topic.to_string()))?;
        Ok(t.partitions.iter().map(|p| p.visible as u64).sum())
    }

    /// Monotone counter bumped whenever messages become visible.
    pub fn generation(&self) -> u64 {
        self.lock().generation
    }

    /// Blocks until the generation moves past `seen` or `timeout` elapses.
    pub fn wait_for_activity(&self, seen: u64, timeout: Duration) -> u64 {
        let deadline = Instant::now() + timeout;
        let mut inner = self.lock();
        loop {
            self.release_expired(&mut inner);
            if inner.generation != seen {
                return inner.generation;
            }
            let now = Instant::now();
            if now >= deadline {
                return inner.generation;
            }
            let slice = (deadline - now).min(Duration::from_millis(1));
            inner = self.activity.wait_timeout(inner, slice).expect("broker lock poisoned").0;
        }
    }

    fn take(&self, inner: &mut Inner, c: &mut Consumer, max: usize) -> Vec<Message> {
        let gate = self.config.visibility == Visibility::Timed && self.config.latency.is_some();
        let now = self.now_ms();
        let Some(t) = inner.topics.get_mut(&c.topic) else {
            return Vec::new();
        };
        let Some(g) = t.groups.get_mut(&c.group) else {
            return Vec::new();
        };
        let assigned = g.assigned(c.member);
        let mut out = Vec::new();
        if assigned.is_empty() {
            return out;
        }
        let start = c.cursor % assigned.len();
        c.cursor = c.cursor.wrapping_add(1);
        for i in 0..assigned.len() {
            let pidx = assigned[(start + i) % assigned.len()];
            let p = &t.partitions[pidx];
            let pos = &mut g.positions[pidx];
            while out.len() < max && (*pos as usize) < p.visible {
                let m = &p.log[*pos as usize].1;
                if gate && m.deliver_at > now {
                    break;
                }
                out.push(m.clone());
                *pos += 1;
            }
            if out.len() >= max {
                break;
            }
        }
        out
    }
}

/// A member of a consumer group on one topic. Dropping it leaves the group.
pub struct Consumer {
    broker: Arc<Broker>,
    topic: String,
    group: String,
    member: u64,
    cursor: usize,
}

impl std::fmt::Debug for Consumer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Consumer")
            .field("topic", &self.topic)
            .field("group", &self.group)
            .field("member", &self.member)
            .finish()
    }
}

impl Consumer {
    pub fn topic(&self) -> &str {
        &self.topic
    }

    /// Partitions currently owned by this member.
    pub fn assignment(&self) -> Vec<u32> {
        let inner = self.broker.lock();
        inner
            .topics
            .get(&self.topic)
            .and_then(|t| t.groups.get(&self.group))
            .map(|g| g.assigned(self.member).into_iter().map(|p| p as u32).collect())
            .unwrap_or_default()
    }

    /// Up to `max` messages without waiting.
    pub fn try_poll(&mut self, max: usize) -> Vec<Message> {
        let broker = Arc::clone(&self.broker);
        let mut inner = broker.lock();
        broker.release_expired(&mut inner);
        broker.take(&mut inner, self, max)
    }

    /// Returns as soon as any message is available, or an empty list once
    /// `timeout_ms` has passed.
    pub fn poll(&mut self, max: usize, timeout_ms: u64) -> Vec<Message> {
        let deadline = Instant::now() + Duration::from_millis(timeout_ms);
        let broker = Arc::clone(&self.broker);
        let mut inner = broker.lock();
        loop {
            broker.release_expired(&mut inner);
            let got = broker.take(&mut inner, self, max);
            if !got.is_empty() {
                return got;
            }
            let now = Instant::now();
            if now >= deadline {
                return got;
            }
            let slice = (deadline - now).min(Duration::from_millis(1));
            inner = broker
                .activity
                .wait_timeout(inner, slice)
                .expect("broker lock poisoned")
                .0;
        }
    }
}

impl Drop for Consumer {
    fn drop(&mut self) {
        self.broker.leave(&self.topic, &self.group, self.member);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use std::collections::HashMap;

    fn immediate() -> BrokerConfig {
        BrokerConfig {
            linger_ms: 0,
            ..BrokerConfig::default()
        }
    }

    #[test]
    fn create_topic_examples() {
        let b = Broker::new(BrokerConfig::default());
        let h = b.create_topic("consensus.prepare", 5).unwrap();
        assert_eq!(h.partitions, 5);
        assert_eq!(b.visible_len("consensus.prepare").unwrap(), 0);
        assert_eq!(b.create_topic("x", 1).unwrap().partitions, 1);
        assert_eq!(
            b.create_topic("x", 1),
            Err(BrokerError::DuplicateTopic("x".into()))
        );
    }

    #[test]
    fn unknown_topic_errors() {
        let b = Broker::new(immediate());
        assert!(matches!(b.publish("nope", b"k", b"v"), Err(BrokerError::UnknownTopic(_))));
        assert!(matches!(b.subscribe("nope", "g"), Err(BrokerError::UnknownTopic(_))));
        assert!(matches!(b.replay("nope", 0), Err(BrokerError::UnknownTopic(_))));
    }

    #[test]
    fn same_key_same_partition_consecutive_offsets() {
        let b = Broker::new(immediate());
        b.create_topic("t", 5).unwrap();
        let a1 = b.publish("t", b"alice", b"1").unwrap();
        let a2 = b.publish("t", b"alice", b"2").unwrap();
        assert_eq!(a1.partition, a2.partition);
        assert_eq!(a2.offset, a1.offset + 1);
    }

    #[test]
    fn zero_linger_is_immediately_visible() {
        let b = Broker::new(immediate());
        b.create_topic("t", 5).unwrap();
        let mut c = b.subscribe("t", "g").unwrap();
        b.publish("t", b"k", b"v").unwrap();
        assert_eq!(c.try_poll(10).len(), 1);
    }

    #[test]
    fn linger_holds_until_flush_or_threshold() {
        let b = Broker::new(BrokerConfig {
            linger_ms: 10_000,
            min_batch_bytes: 20,
            visibility: Visibility::Manual,
            ..BrokerConfig::default()
        });
        b.create_topic("t", 1).unwrap();
        let mut c = b.subscribe("t", "g").unwrap();
        b.publish("t", b"k", b"12345").unwrap();
        assert!(c.try_poll(10).is_empty());
        b.flush();
        assert_eq!(c.try_poll(10).len(), 1);
        b.publish("t", b"k", b"123456789").unwrap();
        assert!(c.try_poll(10).is_empty());
        b.publish("t", b"k", b"123456789").unwrap();
        assert_eq!(c.try_poll(10).len(), 2, "threshold of 20 bytes reached");
    }

    #[test]
    fn timed_linger_releases_after_deadline() {
        let b = Broker::new(BrokerConfig {
            linger_ms: 5,
            ..BrokerConfig::default()
        });
        b.create_topic("t", 1).unwrap();
        let mut c = b.subscribe("t", "g").unwrap();
        b.publish("t", b"k", b"v").unwrap();
        assert!(c.try_poll(10).is_empty());
        let got = c.poll(10, 500);
        assert_eq!(got.len(), 1);
    }

    #[test]
    fn partition_map_covers_every_message_once() {
        let b = Broker::new(immediate());
        b.create_topic("t", 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut expected = HashMap::new();
        for i in 0..100u32 {
            let key: [u8; 8] = rng.gen();
            let ack = b.publish("t", &key, &i.to_le_bytes()).unwrap();
            expected.insert(i, (ack.partition, partition_for(&key, 5)));
        }
        let all = b.replay("t", 0).unwrap();
        assert_eq!(all.len(), 100);
        let mut seen = HashMap::new();
        for m in &all {
            let i = u32::from_le_bytes(m.payload[..].try_into().unwrap());
            assert!(seen.insert(i, m.partition).is_none(), "message {i} twice");
        }
        for (i, (acked, computed)) in expected {
            assert_eq!(seen[&i], acked);
            assert_eq!(acked, computed);
        }
    }

    #[test]
    fn groups_fan_out() {
        let b = Broker::new(immediate());
        b.create_topic("t", 5).unwrap();
        let mut g1 = b.subscribe("t", "one").unwrap();
        let mut g2 = b.subscribe("t", "two").unwrap();
        b.publish("t", b"k", b"m").unwrap();
        assert_eq!(g1.try_poll(10).len(), 1);
        assert_eq!(g2.try_poll(10).len(), 1);
    }

    #[test]
    fn group_members_split_partitions_without_duplicates() {
        let b = Broker::new(immediate());
        b.create_topic("t", 5).unwrap();
        let mut c1 = b.subscribe("t", "g").unwrap();
        let mut c2 = b.subscribe("t", "g").unwrap();
        let mut a1 = c1.assignment();
        let a2 = c2.assignment();
        assert_eq!(a1.len() + a2.len(), 5);
        a1.extend(&a2);
        a1.sort();
        assert_eq!(a1, vec![0, 1, 2, 3, 4]);

        for i in 0..200u32 {
            b.publish("t", &i.to_le_bytes(), &i.to_le_bytes()).unwrap();
        }
        let mut counts = vec![0u32; 200];
        loop {
            let mut got = c1.try_poll(7);
            got.extend(c2.try_poll(7));
            if got.is_empty() {
                break;
            }
            for m in got {
                counts[u32::from_le_bytes(m.payload[..].try_into().unwrap()) as usize] += 1;
            }
        }
        assert!(counts.iter().all(|&c| c == 1));
    }

    #[test]
    fn poll_preserves_fifo() {
        let b = Broker::new(immediate());
        b.create_topic("t", 5).unwrap();
        let mut c = b.subscribe("t", "g").unwrap();
        b.publish("t", b"same", b"m1").unwrap();
        b.publish("t", b"same", b"m2").unwrap();
        let got: Vec<_> = c.try_poll(10).iter().map(|m| m.payload.to_vec()).collect();
        assert_eq!(got, vec![b"m1".to_vec(), b"m2".to_vec()]);
    }

    #[test]
    fn empty_poll_waits_for_timeout() {
        let b = Broker::new(immediate());
        b.create_topic("t", 1).unwrap();
        let mut c = b.subscribe("t", "g").unwrap();
        let start = Instant::now();
        assert!(c.poll(10, 10).is_empty());
        assert!(start.elapsed() >= Duration::from_millis(10));
    }

    #[test]
    fn interleaved_keys_keep_per_key_order() {
        let b = Broker::new(immediate());
        b.create_topic("t", 5).unwrap();
        let mut c = b.subscribe("t", "g").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut sends: Vec<(u8, u32)> = Vec::new();
        for k in 0..10u8 {
            for s in 0..20u32 {
                sends.push((k, s));
            }
        }
        // random interleaving that keeps each key's sequence increasing
        sends.shuffle(&mut rng);
        let mut next = [0u32; 10];
        for (k, _) in sends.iter_mut() {
            let s = next[*k as usize];
            next[*k as usize] += 1;
            let mut payload = vec![*k];
            payload.extend(s.to_le_bytes());
            b.publish("t", &[*k], &payload).unwrap();
        }
        let mut last = [None::<u32>; 10];
        loop {
            let got = c.try_poll(13);
            if got.is_empty() {
                break;
            }
            for m in got {
                let k = m.payload[0] as usize;
                let s = u32::from_le_bytes(m.payload[1..5].try_into().unwrap());
                assert!(last[k].is_none_or(|l| s == l + 1), "key {k} out of order");
                last[k] = Some(s);
            }
        }
        assert!(last.iter().all(|l| *l == Some(19)));
    }

    #[test]
    fn replay_is_idempotent_and_leaves_positions() {
        let b = Broker::new(immediate());
        b.create_topic("t", 1).unwrap();
        let mut c = b.subscribe("t", "g").unwrap();
        for i in 0..10u8 {
            b.publish("t", b"k", &[i]).unwrap();
        }
        let all = b.replay("t", 0).unwrap();
        assert_eq!(all.len(), 10);
        let tail = b.replay("t", 6).unwrap();
        assert_eq!(tail.iter().map(|m| m.payload[0]).collect::<Vec<_>>(), vec![6, 7, 8, 9]);
        assert_eq!(b.replay("t", 0).unwrap(), all);
        assert!(b.replay("t", 50).unwrap().is_empty());
        assert_eq!(c.try_poll(100).len(), 10, "replay must not consume");
    }

    #[test]
    fn injected_latency_is_seeded() {
        let cfg = BrokerConfig {
            linger_ms: 0,
            visibility: Visibility::Manual,
            latency: Some(LatencyInjection {
                min_ms: 1.0,
                max_ms: 3.0,
                seed: 4,
            }),
            ..BrokerConfig::default()
        };
        let run = || {
            let b = Broker::new(cfg.clone());
            b.create_topic("t", 1).unwrap();
            (0..20)
                .map(|_| {
                    b.publish_at("t", b"k", b"v", 100.0).unwrap();
                    b.replay("t", 0).unwrap().last().unwrap().deliver_at
                })
                .collect::<Vec<f64>>()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.iter().all(|&d| (101.0..103.0).contains(&d)));
    }
}
