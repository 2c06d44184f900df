//! The simulation harness: configuration, deployment wiring and reports.

mod config;
mod harness;
mod report;

pub use config::{ConfigError, HarnessConfig, KEYS};
pub use harness::{run_simulation, RunOutput, SchedulerMode, SimError, SEEDED_GENESIS_WALL_MS};
pub use report::{
    analyze, column, summarize, summary_report, topology_report, Analysis, Transition, CHANGE_COLUMNS,
    CORRELATION_COLUMNS, SUMMARY_COLUMNS,
};
