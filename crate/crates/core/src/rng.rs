//! Seeded randomness.
//!
//! Every random draw in the crate comes from xoshiro256** seeded through
//! SplitMix64 (`seed_from_u64`). Independent streams (per epoch, per fold)
//! are derived by mixing a stream index into the user seed.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

pub type SeededRng = Xoshiro256StarStar;

/// Name recorded in reproducibility records.
pub const PRNG_NAME: &str = "xoshiro256** (SplitMix64 seeding)";

pub fn seeded(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Generator for stream `stream` of `seed`; depends on nothing else.
pub fn stream(seed: u64, stream: u64) -> SeededRng {
    let mix = stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    SeededRng::seed_from_u64(seed ^ mix.rotate_left(17))
}
