//! Deterministic random substreams.
//!
//! Every random draw in a run comes from a ChaCha stream keyed by
//! `(master seed, generation, candidate index, purpose)`, so results do not
//! depend on how candidate work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    GlobalSample = 1,
    LocalSearch = 2,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn substream(master: u64, generation: u64, index: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let words = [
        splitmix64(master),
        splitmix64(generation ^ 0x5851_f42d_4c95_7f2d),
        splitmix64(index ^ 0x1405_7b7e_f767_814f),
        splitmix64(purpose as u64),
    ];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
