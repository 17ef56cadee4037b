//! Counter-based random streams.
//!
//! Every path draws from its own ChaCha8 stream, keyed by the run seed and the
//! path index, so a path can be regenerated in isolation and results never
//! depend on how paths are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains keep independent experiments (pricing paths, nested inner
/// sampling, ...) from sharing random numbers under the same user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Paths = 0x5041_5448,
    Outer = 0x4f55_5445,
    Inner = 0x494e_4e52,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a list of integer keys into a single 64-bit key.
pub fn mix_keys(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Generator for stream `stream` of `domain` under `seed`.
pub fn stream(seed: u64, domain: Domain, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_keys(seed, &[domain as u64]));
    rng.set_stream(stream);
    rng
}

/// Generator for a nested key such as `(outer path, u-node)`.
pub fn nested(seed: u64, domain: Domain, keys: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_keys(seed, &[domain as u64]));
    rng.set_stream(mix_keys(0, keys));
    rng
}

/// Seed for the `index`-th independent sub-experiment derived from `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix_keys(seed, &[0x5355_4253, index])
}
