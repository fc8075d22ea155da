//! Seed derivation for reproducible, scheduling-independent random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream selected by a
//! `(key, stream)` pair. The key is a hash of the user seed and a domain tag,
//! the stream index is the unit or replicate number, so the draws seen by a
//! unit never depend on which worker simulated it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep coefficient draws, innovation draws and replicate
/// seeds from sharing a keystream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    Coefficients = 1,
    Innovations = 2,
    Replicates = 3,
    Misc = 4,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for `(seed, domain, index)`.
pub fn stream(seed: u64, domain: StreamDomain, index: u64) -> ChaCha8Rng {
    let key = mix64(seed ^ mix64(domain as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Seed for replicate `r` of an experiment seeded with `seed`.
pub fn replicate_seed(seed: u64, r: u64) -> u64 {
    mix64(mix64(seed ^ 0xA5A5_5A5A_DEAD_BEEF).wrapping_add(r))
}
