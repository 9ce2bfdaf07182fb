//! Seeded random substreams.
//!
//! Every random draw in a run comes from a stream keyed by
//! `(master seed, purpose, id, step)`. Streams are derived by hashing, so the
//! values a node or link sees do not depend on iteration order or on how work
//! is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a substream is used for. The discriminants are part of the
/// reproducibility contract; do not renumber.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    InitialPosition = 1,
    LosChain = 2,
    Measurement = 3,
    Inertial = 4,
    FilterInit = 5,
    FilterStep = 6,
    Ransac = 7,
    Transport = 8,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent generator for `(seed, purpose, id, step)`.
pub fn substream(seed: u64, purpose: Purpose, id: u64, step: u64) -> StreamRng {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ purpose as u64);
    h = splitmix64(h ^ id);
    h = splitmix64(h ^ step);
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        h = splitmix64(h.wrapping_add(i as u64));
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Stable id for an unordered node pair.
pub fn pair_id(lo: u32, hi: u32) -> u64 {
    (u64::from(lo) << 32) | u64::from(hi)
}
