use rand::SeedableRng;

/// The one generator used everywhere. Streams are derived, never shared.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Mixes `(seed, stream name, item id)` into a single 64-bit seed.
pub fn stream_seed(seed: u64, stream: &str, item: u64) -> u64 {
    // FNV-1a over the stream name, then splitmix64 finalisation.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h.rotate_left(17) ^ item.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_rng(seed: u64, stream: &str, item: u64) -> Rng {
    seeded_rng(stream_seed(seed, stream, item))
}
