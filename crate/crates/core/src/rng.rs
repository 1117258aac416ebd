//! Seed derivation for reproducible, order-independent randomness.
//!
//! Every random stream is keyed by `(master_seed, role, index)`. Streams are
//! mixed through the SplitMix64 finalizer and then fed to ChaCha8, so a
//! realization can be regenerated in isolation on any worker thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose of a derived random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Role {
    Matrix = 1,
    Signal = 2,
    Noise = 3,
    Realization = 4,
    Cell = 5,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed, a role tag and an index.
pub fn derive_seed(parent: u64, role: Role, index: u64) -> u64 {
    let a = splitmix64(parent);
    let b = splitmix64(a ^ (role as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix64(b ^ index.wrapping_mul(0x8CB9_2BA7_2F3D_8DD7))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
