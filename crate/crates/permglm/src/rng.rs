//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator addressed by
//! a `(seed, stream)` pair, so any unit of work (one permutation, one
//! replicate, one subject) can be regenerated in isolation without touching
//! the draws of its neighbours. That property is what makes parallel
//! execution reproducible: workers never share generator state.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for stream `stream` of the given seed. Identical `(seed,
/// stream)` pairs always produce identical draws.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from a parent seed and a salt (SplitMix64 finaliser).
/// Used where a sub-component needs a whole seed of its own rather than a
/// stream, e.g. one experiment replicate that internally opens many streams.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Unbiased integer in `[0, bound)` by rejection; `bound` must be nonzero.
fn uniform_index(rng: &mut impl RngCore, bound: u64) -> u64 {
    // Reject the top partial block so every residue is equally likely.
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}

/// Uniform random permutation of `0..len` by Fisher-Yates. Written out
/// locally so the byte stream consumed per permutation is fixed by this
/// crate, not by a dependency's shuffle implementation.
pub fn random_permutation(rng: &mut impl RngCore, len: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    for i in (1..len).rev() {
        let j = uniform_index(rng, i as u64 + 1) as usize;
        idx.swap(i, j);
    }
    idx
}
