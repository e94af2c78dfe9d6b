//! Keyed random streams.
//!
//! Every random draw in the library comes from a ChaCha8 stream whose key is
//! derived from a tuple of integers (master seed, purpose tag, iteration,
//! column). A column of a probe matrix therefore never depends on how many
//! other columns were generated, or on which thread generated it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags that keep the streams of different consumers disjoint.
pub mod tag {
    pub const GRAPH: u64 = 0x67_7261_7068;
    pub const SOLVER: u64 = 0x736f_6c76;
    pub const ROUNDING: u64 = 0x72_6f75_6e64;
    pub const EIGS: u64 = 0x6569_6773;
    pub const EMBED: u64 = 0x65_6d62_6564;
    pub const VERIFY: u64 = 0x7665_7269_6679;
    pub const BENCH: u64 = 0x62_656e_6368;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a sequence of words into a single 64-bit key.
pub fn derive_seed(seed: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(splitmix64(seed), |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// Stream for column `column` of the batch drawn at `iteration` under `seed`.
pub fn column_rng(seed: u64, iteration: u64, column: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[iteration, column]))
}

/// Stream for a one-off purpose (graph generation, initial vectors).
pub fn tagged_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[tag]))
}
