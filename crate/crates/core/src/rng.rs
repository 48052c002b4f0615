//! Named random substreams derived from one seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for `name` under `seed`. The same pair always
/// yields the same sequence.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    // FNV-1a of the name selects the ChaCha stream
    let stream = name
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derived integer seed for APIs that take a plain `u64`.
pub fn subseed(seed: u64, name: &str) -> u64 {
    use rand::Rng;
    substream(seed, name).gen()
}
