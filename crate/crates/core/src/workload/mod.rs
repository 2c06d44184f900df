//! Seeded users, genesis balances and per-round traffic with controlled
//! fraud injection.

mod generator;
mod schedule;
mod source;

pub use generator::{generate_users, FraudKind, InjectionLog, RoundInjection, TrafficGenerator, User, WorkloadError};
pub use schedule::{FraudSchedule, ScheduleError};
pub use source::{publish_traffic, TrafficSource, WorkloadConfig};
