//! Ledger primitives: transactions, Merkle trees, blocks and account state.

mod block;
mod ledger;
mod merkle;
mod transaction;

pub use block::{
    build_block, check_block_structure, quantize_timestamp, validate_block, Block, BlockHeader,
    BlockParams, BlockViolation, BuildError, DEFAULT_BLOCK_SIZE, DEFAULT_GRANULARITY_S,
};
pub use ledger::{apply_block, ApplyError, LedgerState, TxRejection};
pub use merkle::{compute_merkle_root, EmptyTree};
pub use transaction::{sign_transaction, sign_with, Transaction, UnsignedTransaction};
