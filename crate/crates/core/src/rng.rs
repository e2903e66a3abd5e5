//! Deterministic random streams keyed by `(master seed, replica, label)`.
//!
//! Every replica of every experiment draws from its own ChaCha stream, so the
//! way replicas are spread over threads never changes a single draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Derives a child seed from a parent seed, an index and a label.
pub fn derive(seed: u64, index: u64, label: &str) -> u64 {
    splitmix64(splitmix64(seed ^ fnv1a(label)).wrapping_add(splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019))))
}

/// Random stream for `(seed, index, label)`.
pub fn stream(seed: u64, index: u64, label: &str) -> Rng {
    let mut key = [0u8; 32];
    let mut s = derive(seed, index, label);
    for chunk in key.chunks_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
