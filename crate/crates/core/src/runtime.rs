//! Actor clocks and the two schedulers.
//!
//! Every participant is a single-threaded actor exposing `step`. The real
//! scheduler gives each actor its own thread and the monotonic clock. The
//! seeded scheduler is a discrete-event loop on one thread: each actor owns
//! a virtual clock that advances by the work it is charged (see
//! [`crate::cost`]) and jumps forward when it sleeps until a message or
//! timer is due. The actor with the earliest pending event always runs next,
//! ties broken by a ChaCha stream, so a run is a pure function of its seed
//! and every actor behaves as if it had a core of its own.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cost;
use crate::transport::{Broker, BrokerError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Broker(#[from] BrokerError),
    #[error("{actor}: {message}")]
    Protocol { actor: String, message: String },
    #[error("run halted: {0}")]
    Halted(String),
    #[error("run did not finish within {0}")]
    Deadline(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// More work is due now; step again.
    Busy,
    /// Waiting on messages or timers.
    Idle,
    Done,
}

pub trait Actor: Send {
    fn label(&self) -> String;
    fn step(&mut self, clock: &mut ActorClock) -> Result<Step, RunError>;

    /// Earliest time, on this actor's clock, at which an already fetched
    /// message or a timer becomes due. Consulted while the actor is idle.
    fn wake_at(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone)]
enum Mode {
    Real { epoch: Instant },
    Virtual { base_ms: f64, work_mark: Option<u64> },
}

/// Time as seen by one actor.
#[derive(Debug, Clone)]
pub struct ActorClock {
    mode: Mode,
    genesis_wall_ms: u64,
}

impl ActorClock {
    /// Monotonic clock sharing `epoch` with the broker.
    pub fn real(epoch: Instant) -> Self {
        let now_wall = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        let genesis_wall_ms = now_wall.saturating_sub(epoch.elapsed().as_millis() as u64);
        Self {
            mode: Mode::Real { epoch },
            genesis_wall_ms,
        }
    }

    pub fn virtual_at(genesis_wall_ms: u64) -> Self {
        Self {
            mode: Mode::Virtual {
                base_ms: 0.0,
                work_mark: None,
            },
            genesis_wall_ms,
        }
    }

    pub fn is_virtual(&self) -> bool {
        matches!(self.mode, Mode::Virtual { .. })
    }

    /// Milliseconds since the run started; used for every reported timing,
    /// timeout and message stamp.
    pub fn now_ms(&self) -> f64 {
        match &self.mode {
            Mode::Real { epoch } => epoch.elapsed().as_secs_f64() * 1000.0,
            Mode::Virtual { base_ms, work_mark } => {
                base_ms + work_mark.map_or(0.0, |m| (cost::work_ns() - m) as f64 / 1e6)
            }
        }
    }

    /// Advances a virtual clock to `t_ms` if it is behind.
    pub fn observe(&mut self, t_ms: f64) {
        let now = self.now_ms();
        if let Mode::Virtual { base_ms, work_mark } = &mut self.mode {
            if t_ms > now {
                *base_ms = t_ms;
                if work_mark.is_some() {
                    *work_mark = Some(cost::work_ns());
                }
            }
        }
    }

    /// Whole milliseconds since the run started.
    pub fn protocol_ms(&self) -> u64 {
        self.now_ms() as u64
    }

    /// Wall clock in Unix milliseconds for transaction and block timestamps.
    pub fn wall_ms(&self) -> u64 {
        self.genesis_wall_ms + self.protocol_ms()
    }

    fn enter(&mut self) {
        if let Mode::Virtual { work_mark, .. } = &mut self.mode {
            *work_mark = Some(cost::work_ns());
        }
    }

    fn leave(&mut self) {
        let now = self.now_ms();
        if let Mode::Virtual { base_ms, work_mark } = &mut self.mode {
            *base_ms = now;
            *work_mark = None;
        }
    }
}

/// Runs every actor to completion under virtual time. Returns the actors
/// and the number of steps taken. Fails once the earliest pending event lies
/// beyond `max_virtual_ms` or when no actor can make progress.
pub fn run_seeded<A: Actor>(
    mut actors: Vec<A>,
    broker: &Broker,
    seed: u64,
    genesis_wall_ms: u64,
    max_virtual_ms: u64,
) -> Result<(Vec<A>, u64), RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clocks: Vec<ActorClock> = actors.iter().map(|_| ActorClock::virtual_at(genesis_wall_ms)).collect();
    let mut done = vec![false; actors.len()];
    let mut runnable = vec![true; actors.len()];
    let mut steps = 0u64;
    loop {
        broker.flush();
        if done.iter().all(|&d| d) {
            return Ok((actors, steps));
        }
        let mut next: Option<(f64, u64, usize)> = None;
        for i in 0..actors.len() {
            if done[i] {
                continue;
            }
            let now = clocks[i].now_ms();
            let due = if runnable[i] {
                Some(now)
            } else {
                actors[i].wake_at().map(|w| w.max(now))
            };
            if let Some(t) = due {
                let key = (t, rng.gen::<u64>(), i);
                if next.is_none_or(|n| (key.0, key.1) < (n.0, n.1)) {
                    next = Some(key);
                }
            }
        }
        let Some((t, _, i)) = next else {
            let waiting: Vec<String> = actors
                .iter()
                .zip(&done)
                .filter(|(_, &d)| !d)
                .map(|(a, _)| a.label())
                .collect();
            return Err(RunError::Deadline(format!("a stall; waiting forever: {}", waiting.join(", "))));
        };
        if t > max_virtual_ms as f64 {
            let pending: Vec<String> = actors
                .iter()
                .zip(&done)
                .filter(|(_, &d)| !d)
                .map(|(a, _)| a.label())
                .collect();
            return Err(RunError::Deadline(format!(
                "{max_virtual_ms} virtual ms; still running: {}",
                pending.join(", ")
            )));
        }
        clocks[i].observe(t);
        let generation = broker.generation();
        clocks[i].enter();
        let res = actors[i].step(&mut clocks[i]);
        clocks[i].leave();
        steps += 1;
        match res? {
            Step::Done => done[i] = true,
            Step::Busy => runnable[i] = true,
            Step::Idle => runnable[i] = false,
        }
        broker.flush();
        if broker.generation() != generation {
            for (j, r) in runnable.iter_mut().enumerate() {
                if j != i {
                    *r = true;
                }
            }
        }
    }
}

/// One thread per actor on the monotonic clock. The first error stops every
/// actor; `deadline` bounds the whole run.
pub fn run_threaded<A: Actor + 'static>(
    actors: Vec<A>,
    broker: &Arc<Broker>,
    deadline: Duration,
) -> Result<Vec<A>, RunError> {
    let stop = Arc::new(AtomicBool::new(false));
    let started = Instant::now();
    let handles: Vec<_> = actors
        .into_iter()
        .map(|mut actor| {
            let broker = Arc::clone(broker);
            let stop = Arc::clone(&stop);
            thread::Builder::new()
                .name(actor.label())
                .spawn(move || {
                    let mut clock = ActorClock::real(broker.epoch());
                    let result = loop {
                        if stop.load(Ordering::Relaxed) {
                            break Ok(());
                        }
                        if started.elapsed() > deadline {
                            stop.store(true, Ordering::Relaxed);
                            break Err(RunError::Deadline(format!("{deadline:?} ({})", actor.label())));
                        }
                        let seen = broker.generation();
                        match actor.step(&mut clock) {
                            Ok(Step::Busy) => {}
                            Ok(Step::Idle) => {
                                broker.wait_for_activity(seen, Duration::from_millis(2));
                            }
                            Ok(Step::Done) => break Ok(()),
                            Err(e) => {
                                stop.store(true, Ordering::Relaxed);
                                break Err(e);
                            }
                        }
                    };
                    (actor, result)
                })
                .expect("spawn actor thread")
        })
        .collect();
    let mut out = Vec::new();
    let mut first_err = None;
    for h in handles {
        let (actor, res) = h.join().expect("actor thread panicked");
        if let Err(e) = res {
            first_err.get_or_insert(e);
        }
        out.push(actor);
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}
