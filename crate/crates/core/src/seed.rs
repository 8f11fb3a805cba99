//! Deterministic seed derivation.
//!
//! Every task of a run draws from its own generator, seeded by a stable
//! 64-bit hash of the master seed and a task identifier. The hash must not
//! change between releases or platforms, so it is spelled out here rather
//! than borrowed from `std::hash`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable hash of `(master, task)`.
pub fn derive_seed(master: u64, task: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in master.to_le_bytes().iter().chain(task.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

/// Counter-based child seed, used where tasks are indexed rather than named.
pub fn derive_indexed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn task_rng(master: u64, task: &str) -> Rng {
    rng_from_seed(derive_seed(master, task))
}
