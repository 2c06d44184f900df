use std::collections::BTreeMap;

use criterion::{black_box, criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use hybridchain::chain::{build_block, compute_merkle_root, BlockParams};
use hybridchain::consensus::NodeId;
use hybridchain::crypto::{sha256, Digest};
use hybridchain::master::select_validators;
use hybridchain_bench::valid_transactions;

fn bench_build_block(c: &mut Criterion) {
    let txs = valid_transactions(512, 1);
    c.bench_function("build_block/512", |b| {
        b.iter_batched(
            || txs.clone(),
            |t| build_block(t, Digest::ZERO, 1, 1_700_000_000_000, BlockParams::default()).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_merkle(c: &mut Criterion) {
    let mut g = c.benchmark_group("merkle_root");
    for n in [64usize, 512, 4096] {
        let leaves: Vec<Digest> = (0..n as u64).map(|i| sha256(&i.to_le_bytes())).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &leaves, |b, l| {
            b.iter(|| compute_merkle_root(black_box(l)).unwrap())
        });
    }
    g.finish();
}

fn bench_verify(c: &mut Criterion) {
    let txs = valid_transactions(64, 2);
    c.bench_function("verify_signature/64", |b| {
        b.iter(|| txs.iter().filter(|t| t.verify_signature()).count())
    });
}

fn bench_selection(c: &mut Criterion) {
    let mut g = c.benchmark_group("select_validators");
    for n in [4u32, 100, 1000] {
        let stakes: BTreeMap<NodeId, u64> = (0..n).map(|i| (NodeId(i), 1 + u64::from(i % 7))).collect();
        let seed = sha256(b"bench");
        g.bench_with_input(BenchmarkId::from_parameter(n), &stakes, |b, s| {
            b.iter(|| select_validators(black_box(s), (n as usize).div_ceil(3), &seed, 1).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_build_block, bench_merkle, bench_verify, bench_selection);
criterion_main!(benches);
