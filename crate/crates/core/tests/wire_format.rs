//! Byte layouts pinned against the published wire-format document.

use hybridchain::chain::{build_block, compute_merkle_root, sign_with, BlockParams, Transaction, UnsignedTransaction};
use hybridchain::consensus::{Body, Envelope, NodeId};
use hybridchain::crypto::{sha256, sha256_concat, Digest, KeyPair};

fn key(b: u8) -> KeyPair {
    KeyPair::from_secret([b; 32])
}

fn tx(from: &KeyPair, nonce: u64) -> Transaction {
    sign_with(
        UnsignedTransaction {
            sender: from.public_key(),
            recipient: key(99).public_key(),
            amount: 0x0102,
            nonce,
            created_at: 7,
        },
        from,
    )
}

#[test]
fn transaction_layout() {
    let k = key(1);
    let t = tx(&k, 3);
    let body = t.body.signing_bytes();
    assert_eq!(body.len(), 96);
    assert_eq!(&body[..4], &32u32.to_le_bytes());
    assert_eq!(&body[4..36], &k.public_key().0);
    assert_eq!(&body[72..80], &0x0102u64.to_le_bytes());
    assert_eq!(&body[80..88], &3u64.to_le_bytes());
    let bytes = t.to_bytes();
    assert_eq!(bytes.len(), 164);
    assert_eq!(&bytes[..96], &body[..]);
    assert_eq!(&bytes[96..100], &64u32.to_le_bytes());
    assert_eq!(t.id(), sha256(&bytes));
    assert!(hybridchain::crypto::verify(&k.public_key(), &body, &t.signature));
}

#[test]
fn header_layout_and_merkle_rule() {
    let txs: Vec<Transaction> = (1..=3).map(|i| tx(&key(i), 1)).collect();
    let params = BlockParams { block_size: 3, granularity_s: 5 };
    let block = build_block(txs, Digest::ZERO, 1, 1_700_000_012_345, params).unwrap();
    let h = block.header.to_bytes();
    assert_eq!(h.len(), 92);
    assert_eq!(&h[..8], &1u64.to_le_bytes());
    assert_eq!(&h[80..88], &1_700_000_010u64.to_le_bytes());
    assert_eq!(&h[88..92], &3u32.to_le_bytes());
    assert_eq!(block.hash(), sha256(&h));

    let ids: Vec<Digest> = block.transactions.iter().map(Transaction::id).collect();
    let l = sha256_concat(&[&ids[0].0, &ids[1].0]);
    let r = sha256_concat(&[&ids[2].0, &ids[2].0]);
    assert_eq!(block.header.merkle_root, sha256_concat(&[&l.0, &r.0]));
    assert_eq!(compute_merkle_root(&ids).unwrap(), block.header.merkle_root);
}

#[test]
fn envelope_layout() {
    let k = key(5);
    let env = Body::Prepare { block_hash: Digest([0xAB; 32]) }.seal(NodeId(2), 9, 1, &k);
    let bytes = env.to_bytes();
    assert_eq!(bytes[0], 6);
    assert_eq!(&bytes[1..5], &2u32.to_le_bytes());
    assert_eq!(&bytes[5..13], &9u64.to_le_bytes());
    assert_eq!(&bytes[13..17], &1u32.to_le_bytes());
    assert_eq!(&bytes[17..21], &36u32.to_le_bytes());
    assert_eq!(&bytes[21..25], &32u32.to_le_bytes());
    let signed_len = bytes.len() - 68;
    assert!(hybridchain::crypto::verify(&k.public_key(), &bytes[..signed_len], &env.signature));
    assert_eq!(Envelope::from_bytes(&bytes).unwrap(), env);
}
