//! Seed stream derivation.
//!
//! Every random stream in a run is keyed by `(seed, purpose, index)`. The
//! purpose tag is hashed with FNV-1a, combined with the seed and index, and
//! finalized with the SplitMix64 mixer. The resulting 64-bit value seeds a
//! ChaCha8 generator, which is portable across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(tag: &str) -> u64 {
    tag.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit sub-seed for `(seed, purpose, index)`.
pub fn derive_seed(seed: u64, purpose: &str, index: u64) -> u64 {
    let a = splitmix(seed ^ fnv1a(purpose));
    splitmix(a ^ splitmix(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn stream(seed: u64, purpose: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, purpose, index))
}
