//! Shared fixtures for the benchmarks.

use hybridchain::chain::Transaction;
use hybridchain::workload::{generate_users, FraudSchedule, TrafficGenerator};

/// One round of all-valid traffic of `count` transactions.
pub fn valid_transactions(count: usize, seed: u64) -> Vec<Transaction> {
    let users = generate_users(1000, seed).expect("enough users");
    let mut generator = TrafficGenerator::new(users, 1, count, 64, FraudSchedule::default(), seed);
    generator.generate_round_traffic(1, 0).into_iter().flatten().collect()
}
