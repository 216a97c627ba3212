//! Seed derivation for independent deterministic random streams.
//!
//! Experiments fan out into many simulation/training/evaluation streams that
//! must each be reproducible from a single master seed, no matter in which
//! order worker threads pick them up. `derive_seed` mixes the master seed
//! with a list of stream labels (purpose tag, switching period, run index,
//! ...) so every stream gets a stable, well-separated seed.

/// One round of the splitmix64 output mixer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a stream seed from a master seed and a list of stream labels.
///
/// The same `(master, parts)` always yields the same seed; distinct label
/// lists yield statistically independent seeds.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &part in parts {
        state = splitmix64(state ^ splitmix64(part));
    }
    state
}
