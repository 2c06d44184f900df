//! Work accounting for the seeded scheduler.
//!
//! Cryptographic primitives and broker message handling charge a fixed
//! number of nanoseconds to a per-thread counter. Under the seeded scheduler
//! every actor runs on one thread, so the counter's growth during a step is
//! that actor's compute time, identical on every machine and every run. The
//! table was measured on a single core in a release build.

use std::cell::Cell;

/// One Ed25519 signature.
pub const SIGN_NS: u64 = 16_000;
/// One Ed25519 verification.
pub const VERIFY_NS: u64 = 50_000;
/// Fixed part of one SHA-256 invocation.
pub const HASH_BASE_NS: u64 = 70;
/// Each 64-byte SHA-256 input block.
pub const HASH_BLOCK_NS: u64 = 41;
/// Publishing or consuming one broker message.
pub const MESSAGE_NS: u64 = 2_000;
/// Each payload byte of a published or consumed message.
pub const MESSAGE_BYTE_NS: f64 = 0.5;

thread_local! {
    static WORK_NS: Cell<u64> = const { Cell::new(0) };
    static PAUSED: Cell<u32> = const { Cell::new(0) };
}

pub fn charge(ns: u64) {
    if PAUSED.with(Cell::get) == 0 {
        WORK_NS.with(|w| w.set(w.get() + ns));
    }
}

pub fn charge_hash(bytes: usize) {
    charge(HASH_BASE_NS + HASH_BLOCK_NS * (bytes as u64 / 64 + 1));
}

pub fn charge_message(bytes: usize) {
    charge(MESSAGE_NS + (bytes as f64 * MESSAGE_BYTE_NS) as u64);
}

/// Total work charged on this thread so far.
pub fn work_ns() -> u64 {
    WORK_NS.with(Cell::get)
}

/// Runs `f` without charging anything to this thread.
pub fn untracked<R>(f: impl FnOnce() -> R) -> R {
    struct Resume;
    impl Drop for Resume {
        fn drop(&mut self) {
            PAUSED.with(|p| p.set(p.get() - 1));
        }
    }
    PAUSED.with(|p| p.set(p.get() + 1));
    let _resume = Resume;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charges_accumulate_unless_paused() {
        let start = work_ns();
        charge(10);
        untracked(|| charge(1_000));
        charge_hash(100);
        assert_eq!(work_ns() - start, 10 + HASH_BASE_NS + 2 * HASH_BLOCK_NS);
    }
}
