use std::collections::VecDeque;

use crate::cost;

use super::broker::{Consumer, Message};

/// A consumer plus the messages already fetched but not yet due.
///
/// Messages are released in fetch order, and only once the reader's clock
/// has reached their delivery time, so an actor never acts on a message
/// before it would have arrived.
#[derive(Debug)]
pub struct TimedInbox {
    consumer: Consumer,
    pending: VecDeque<Message>,
}

impl TimedInbox {
    pub fn new(consumer: Consumer) -> Self {
        Self {
            consumer,
            pending: VecDeque::new(),
        }
    }

    /// Moves everything visible on the broker into the local queue.
    pub fn fetch(&mut self) {
        self.pending.extend(self.consumer.try_poll(usize::MAX));
    }

    /// Up to `max` messages due at `now_ms`.
    pub fn take_due(&mut self, now_ms: f64, max: usize) -> Vec<Message> {
        let mut out = Vec::new();
        while out.len() < max && self.pending.front().is_some_and(|m| m.deliver_at <= now_ms) {
            let m = self.pending.pop_front().expect("front checked");
            cost::charge_message(m.key.len() + m.payload.len());
            out.push(m);
        }
        out
    }

    /// Delivery time of the next queued message.
    pub fn next_due(&self) -> Option<f64> {
        self.pending.front().map(|m| m.deliver_at)
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }
}
