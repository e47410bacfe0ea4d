//! Seed derivation tree.
//!
//! Every random stream in the crate descends from one master seed:
//! `master -> experiment/grid point -> trial`. A child seed is
//! `splitmix64(parent ^ fnv1a(label) ^ splitmix64(index))`, so children are
//! independent of evaluation order and of how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Child seed for `(label, index)` under `parent`.
pub fn derive(parent: u64, label: &str, index: u64) -> u64 {
    splitmix64(parent ^ fnv1a(label) ^ splitmix64(index))
}

/// Deterministic generator for a seed.
pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn children_differ_by_label_and_index() {
        let a = derive(7, "trial", 0);
        assert_ne!(a, derive(7, "trial", 1));
        assert_ne!(a, derive(7, "codebook", 0));
        assert_ne!(a, derive(8, "trial", 0));
        assert_eq!(a, derive(7, "trial", 0));
    }
}
