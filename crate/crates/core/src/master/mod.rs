//! Network governance: registry and authentication, stake-weighted
//! selection with a monopoly cap, and barrier coordination of each round.

mod coordinator;
mod registry;
mod selection;

pub use coordinator::{Master, MasterConfig, MasterReport, RoundOutcome, RoundRecord, DEFAULT_RETRY_BUDGET};
pub use registry::{AuthRejection, Authentication, RegistryError, ValidatorEntry, ValidatorRegistry, ValidatorStatus};
pub use selection::{
    plan_round, round_seed, select_validators, selection_key, selection_uniform, SelectionConfig, SelectionError,
    DEFAULT_STAKE_CAP,
};
