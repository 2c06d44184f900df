use std::fmt;

use thiserror::Error;

use super::ledger::{LedgerState, TxRejection};
use super::merkle::compute_merkle_root;
use super::transaction::Transaction;
use crate::codec::{DecodeError, Decoder, Encoder};
use crate::crypto::{self, Digest};

pub const DEFAULT_BLOCK_SIZE: usize = 512;
pub const DEFAULT_GRANULARITY_S: u64 = 5;

/// Floors a millisecond wall-clock reading to a multiple of `granularity_s`
/// seconds, returned in seconds.
///
/// Panics if `granularity_s` is zero.
pub fn quantize_timestamp(t_ms: u64, granularity_s: u64) -> u64 {
    assert!(granularity_s > 0, "quantization granularity must be positive");
    t_ms / 1000 / granularity_s * granularity_s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockParams {
    pub block_size: usize,
    pub granularity_s: u64,
}

impl Default for BlockParams {
    fn default() -> Self {
        Self {
            block_size: DEFAULT_BLOCK_SIZE,
            granularity_s: DEFAULT_GRANULARITY_S,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockHeader {
    pub height: u64,
    pub prev_hash: Digest,
    pub merkle_root: Digest,
    /// Seconds, always a multiple of the quantization granularity.
    pub timestamp_q: u64,
    pub tx_count: u32,
}

impl BlockHeader {
    pub fn encode_into(&self, e: &mut Encoder) {
        e.u64(self.height)
            .bytes(&self.prev_hash.0)
            .bytes(&self.merkle_root.0)
            .u64(self.timestamp_q)
            .u32(self.tx_count);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::with_capacity(92);
        self.encode_into(&mut e);
        e.finish()
    }

    pub fn decode_from(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            height: d.u64()?,
            prev_hash: Digest(d.array("prev_hash")?),
            merkle_root: Digest(d.array("merkle_root")?),
            timestamp_q: d.u64()?,
            tx_count: d.u32()?,
        })
    }

    pub fn hash(&self) -> Digest {
        crypto::sha256(&self.to_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    pub fn hash(&self) -> Digest {
        self.header.hash()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::with_capacity(96 + self.transactions.len() * 168);
        self.header.encode_into(&mut e);
        e.u32(self.transactions.len() as u32);
        for tx in &self.transactions {
            e.bytes(&tx.to_bytes());
        }
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut d = Decoder::new(bytes);
        let header = BlockHeader::decode_from(&mut d)?;
        let n = d.u32()? as usize;
        let mut transactions = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            transactions.push(Transaction::from_bytes(d.bytes()?)?);
        }
        d.finish()?;
        Ok(Self {
            header,
            transactions,
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("block needs exactly {expected} transactions, got {got}")]
    WrongTxCount { expected: usize, got: usize },
}

/// Builds a block from exactly `params.block_size` transactions.
///
/// Input order does not matter: transactions are sorted by
/// `(sender, nonce, id)` and the timestamp is quantized, so independent
/// builders in the same window agree byte for byte. Sorting by sender and
/// nonce first keeps each account's transfers applicable in sequence.
pub fn build_block(
    mut txs: Vec<Transaction>,
    prev_hash: Digest,
    height: u64,
    now_ms: u64,
    params: BlockParams,
) -> Result<Block, BuildError> {
    if txs.len() != params.block_size {
        return Err(BuildError::WrongTxCount {
            expected: params.block_size,
            got: txs.len(),
        });
    }
    let mut keyed: Vec<(Digest, Transaction)> = txs.drain(..).map(|t| (t.id(), t)).collect();
    keyed.sort_unstable_by(|(ia, a), (ib, b)| {
        (a.sender(), a.nonce(), ia).cmp(&(b.sender(), b.nonce(), ib))
    });
    let ids: Vec<Digest> = keyed.iter().map(|(id, _)| *id).collect();
    let merkle_root = compute_merkle_root(&ids).map_err(|_| BuildError::WrongTxCount {
        expected: params.block_size,
        got: 0,
    })?;
    let header = BlockHeader {
        height,
        prev_hash,
        merkle_root,
        timestamp_q: quantize_timestamp(now_ms, params.granularity_s),
        tx_count: ids.len() as u32,
    };
    Ok(Block {
        header,
        transactions: keyed.into_iter().map(|(_, t)| t).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockViolation {
    BadPrevHash,
    BadMerkle,
    BadTimestamp,
    BadTxCount,
    InvalidTx { index: usize, reason: TxRejection },
}

impl fmt::Display for BlockViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockViolation::BadPrevHash => f.write_str("BadPrevHash"),
            BlockViolation::BadMerkle => f.write_str("BadMerkle"),
            BlockViolation::BadTimestamp => f.write_str("BadTimestamp"),
            BlockViolation::BadTxCount => f.write_str("BadTxCount"),
            BlockViolation::InvalidTx { index, reason } => {
                write!(f, "InvalidTx({index}, {reason})")
            }
        }
    }
}

/// Header checks that need no ledger: linkage, Merkle root, quantization and
/// transaction count.
pub fn check_block_structure(
    block: &Block,
    prev_hash_expected: &Digest,
    granularity_s: u64,
) -> Vec<BlockViolation> {
    let mut out = Vec::new();
    let h = &block.header;
    if h.prev_hash != *prev_hash_expected {
        out.push(BlockViolation::BadPrevHash);
    }
    if h.tx_count as usize != block.transactions.len() {
        out.push(BlockViolation::BadTxCount);
    }
    let ids: Vec<Digest> = block.transactions.iter().map(Transaction::id).collect();
    match compute_merkle_root(&ids) {
        Ok(root) if root == h.merkle_root => {}
        _ => out.push(BlockViolation::BadMerkle),
    }
    if granularity_s == 0 || !h.timestamp_q.is_multiple_of(granularity_s) {
        out.push(BlockViolation::BadTimestamp);
    }
    out
}

/// Full validation: structure plus every signature and sequential
/// balance/nonce feasibility against `ledger`.
pub fn validate_block(
    block: &Block,
    ledger: &LedgerState,
    prev_hash_expected: &Digest,
    granularity_s: u64,
) -> Result<(), Vec<BlockViolation>> {
    let mut out = check_block_structure(block, prev_hash_expected, granularity_s);
    let mut working = ledger.clone();
    for (index, tx) in block.transactions.iter().enumerate() {
        let res = if tx.verify_signature() {
            working.apply_tx(tx)
        } else {
            Err(TxRejection::InvalidSignature)
        };
        if let Err(reason) = res {
            out.push(BlockViolation::InvalidTx { index, reason });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ledger::apply_block;
    use crate::chain::transaction::{sign_with, UnsignedTransaction};
    use crate::crypto::KeyPair;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        users: Vec<KeyPair>,
        ledger: LedgerState,
    }

    fn fixture(n_users: usize) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let users: Vec<KeyPair> = (0..n_users).map(|_| KeyPair::generate(&mut rng)).collect();
        let ledger = LedgerState::with_genesis(users.iter().map(|u| (u.public_key(), 1_000_000)));
        Fixture { users, ledger }
    }

    /// `count` valid transfers with per-sender increasing nonces.
    fn valid_txs(f: &Fixture, count: usize, seed: u64) -> Vec<Transaction> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nonces = vec![0u64; f.users.len()];
        (0..count)
            .map(|_| {
                let s = rng.gen_range(0..f.users.len());
                let mut r = rng.gen_range(0..f.users.len());
                if r == s {
                    r = (r + 1) % f.users.len();
                }
                nonces[s] += 1;
                sign_with(
                    UnsignedTransaction {
                        sender: f.users[s].public_key(),
                        recipient: f.users[r].public_key(),
                        amount: rng.gen_range(1..1000),
                        nonce: nonces[s],
                        created_at: 1_736_900_000_000,
                    },
                    &f.users[s],
                )
            })
            .collect()
    }

    fn params(block_size: usize) -> BlockParams {
        BlockParams {
            block_size,
            granularity_s: 5,
        }
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_timestamp(1_736_900_003_000, 5), 1_736_900_000);
        assert_eq!(quantize_timestamp(1_736_900_005_000, 5), 1_736_900_005);
        assert_eq!(quantize_timestamp(4_999, 5), 0);
    }

    #[test]
    fn same_window_same_block() {
        let f = fixture(50);
        let txs = valid_txs(&f, 512, 1);
        let a = build_block(txs.clone(), Digest::ZERO, 0, 1_736_900_000_100, params(512)).unwrap();
        let b = build_block(txs, Digest::ZERO, 0, 1_736_900_004_900, params(512)).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn permuted_input_same_block() {
        let f = fixture(50);
        let txs = valid_txs(&f, 64, 2);
        let mut shuffled = txs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
        let a = build_block(txs, Digest::ZERO, 0, 10_000, params(64)).unwrap();
        let b = build_block(shuffled, Digest::ZERO, 0, 10_000, params(64)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_tx_changes_root_and_hash() {
        let f = fixture(50);
        let txs = valid_txs(&f, 64, 4);
        let mut other = txs.clone();
        let mut body = other[10].body;
        body.amount += 1;
        other[10] = sign_with(body, &f.users.iter().find(|u| u.public_key() == body.sender).unwrap().clone());
        let a = build_block(txs, Digest::ZERO, 0, 10_000, params(64)).unwrap();
        let b = build_block(other, Digest::ZERO, 0, 10_000, params(64)).unwrap();
        assert_ne!(a.header.merkle_root, b.header.merkle_root);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn wrong_count_rejected() {
        let f = fixture(10);
        let txs = valid_txs(&f, 511, 5);
        assert_eq!(
            build_block(txs, Digest::ZERO, 0, 0, params(512)),
            Err(BuildError::WrongTxCount {
                expected: 512,
                got: 511
            })
        );
    }

    #[test]
    fn built_block_validates() {
        let f = fixture(50);
        let block = build_block(valid_txs(&f, 128, 6), Digest::ZERO, 0, 10_000, params(128)).unwrap();
        assert_eq!(validate_block(&block, &f.ledger, &Digest::ZERO, 5), Ok(()));
    }

    #[test]
    fn overspend_reported() {
        let f = fixture(2);
        let mut txs = valid_txs(&f, 3, 7);
        let body = UnsignedTransaction {
            sender: f.users[0].public_key(),
            recipient: f.users[1].public_key(),
            amount: 5_000_000,
            nonce: 1_000,
            created_at: 0,
        };
        txs.push(sign_with(body, &f.users[0]));
        let block = build_block(txs, Digest::ZERO, 0, 0, params(4)).unwrap();
        let violations = validate_block(&block, &f.ledger, &Digest::ZERO, 5).unwrap_err();
        assert_eq!(violations.len(), 1);
        assert!(matches!(
            violations[0],
            BlockViolation::InvalidTx {
                reason: TxRejection::InsufficientBalance,
                ..
            }
        ));
    }

    #[test]
    fn altered_root_and_linkage_reported() {
        let f = fixture(20);
        let mut block = build_block(valid_txs(&f, 8, 8), Digest::ZERO, 0, 0, params(8)).unwrap();
        block.header.merkle_root.0[0] ^= 0xff;
        assert_eq!(
            validate_block(&block, &f.ledger, &Digest::ZERO, 5),
            Err(vec![BlockViolation::BadMerkle])
        );
        block.header.timestamp_q = 7;
        let v = validate_block(&block, &f.ledger, &crypto::sha256(b"other"), 5).unwrap_err();
        assert_eq!(
            v,
            vec![
                BlockViolation::BadPrevHash,
                BlockViolation::BadMerkle,
                BlockViolation::BadTimestamp
            ]
        );
    }

    #[test]
    fn forged_signature_reported() {
        let f = fixture(20);
        let mut block = build_block(valid_txs(&f, 8, 9), Digest::ZERO, 0, 0, params(8)).unwrap();
        block.transactions[3].signature.0[5] ^= 1;
        // re-root so only the signature check fails
        let ids: Vec<Digest> = block.transactions.iter().map(Transaction::id).collect();
        block.header.merkle_root = compute_merkle_root(&ids).unwrap();
        assert_eq!(
            validate_block(&block, &f.ledger, &Digest::ZERO, 5),
            Err(vec![BlockViolation::InvalidTx {
                index: 3,
                reason: TxRejection::InvalidSignature
            }])
        );
    }

    #[test]
    fn apply_simple_transfer() {
        let f = fixture(2);
        let ledger = LedgerState::with_genesis([(f.users[0].public_key(), 100), (f.users[1].public_key(), 0)]);
        let tx = sign_with(
            UnsignedTransaction {
                sender: f.users[0].public_key(),
                recipient: f.users[1].public_key(),
                amount: 40,
                nonce: 1,
                created_at: 0,
            },
            &f.users[0],
        );
        let block = build_block(vec![tx], Digest::ZERO, 0, 0, params(1)).unwrap();
        let next = apply_block(&ledger, &block).unwrap();
        assert_eq!(next.balance(&f.users[0].public_key()), 60);
        assert_eq!(next.balance(&f.users[1].public_key()), 40);
        assert_eq!(next.nonce(&f.users[0].public_key()), 1);
        assert_eq!(next.total_balance(), ledger.total_balance());
    }

    #[test]
    fn apply_matches_sequential_fold() {
        let f = fixture(100);
        let block = build_block(valid_txs(&f, 512, 10), Digest::ZERO, 0, 0, params(512)).unwrap();
        let applied = apply_block(&f.ledger, &block).unwrap();

        // Oracle: plain balance arithmetic over a HashMap, one tx at a time.
        let mut balances: std::collections::HashMap<_, i128> =
            f.users.iter().map(|u| (u.public_key(), 1_000_000i128)).collect();
        for tx in &block.transactions {
            *balances.get_mut(tx.sender()).unwrap() -= tx.amount() as i128;
            *balances.get_mut(tx.recipient()).unwrap() += tx.amount() as i128;
        }
        for u in &f.users {
            assert_eq!(applied.balance(&u.public_key()) as i128, balances[&u.public_key()]);
        }
        assert_eq!(applied.total_balance(), f.ledger.total_balance());
    }

    #[test]
    fn apply_invalid_block_errors_and_leaves_input() {
        let f = fixture(2);
        let tx = sign_with(
            UnsignedTransaction {
                sender: f.users[0].public_key(),
                recipient: f.users[1].public_key(),
                amount: 2_000_000,
                nonce: 1,
                created_at: 0,
            },
            &f.users[0],
        );
        let block = build_block(vec![tx], Digest::ZERO, 0, 0, params(1)).unwrap();
        let before = f.ledger.clone();
        assert!(apply_block(&f.ledger, &block).is_err());
        assert_eq!(before, f.ledger);
    }

    #[test]
    fn block_bytes_round_trip() {
        let f = fixture(20);
        let block = build_block(valid_txs(&f, 16, 11), Digest::ZERO, 3, 12_345, params(16)).unwrap();
        assert_eq!(Block::from_bytes(&block.to_bytes()).unwrap(), block);
    }
}
