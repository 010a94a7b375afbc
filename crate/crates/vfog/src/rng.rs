use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for everything randomized in the crate. Same seed,
/// same stream, on every platform.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Splits one master seed into independent per-purpose seeds so that,
/// e.g., trace synthesis and weight init never share a stream.
/// splitmix64 finalizer; stream ids are small constants at call sites.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
