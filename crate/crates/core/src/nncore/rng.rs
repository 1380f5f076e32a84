//! Seeded random streams.
//!
//! A run has one integer seed. Each consumer draws from its own named stream,
//! further split by an index (epoch, fold, synthetic-row counter...), so adding
//! draws in one place never shifts the sequence seen by another.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Dropout = 2,
    Shuffle = 3,
    Smote = 4,
    Synth = 5,
    Importance = 6,
    Folds = 7,
    Derive = 8,
}

pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> StreamRng {
    let key = seed ^ (stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Derives an independent child seed, e.g. one per cross-validation fold.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    stream_rng(seed, Stream::Derive, index).next_u64()
}
