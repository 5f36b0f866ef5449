//! Counter-based seed derivation.
//!
//! Every random quantity in the crate is drawn from a ChaCha stream whose key
//! is derived from a path of tags, e.g. `master -> cell -> "source" -> "z"`.
//! Two streams with different paths never share draws, so switching one
//! mechanism on or off leaves the draws consumed by every other mechanism
//! untouched, and results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the bytes of a tag. Stable across platforms and releases.
pub fn tag_hash(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// A node in the seed derivation tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree(u64);

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        SeedTree(splitmix64(seed))
    }

    pub fn child(&self, tag: &str) -> Self {
        SeedTree(splitmix64(self.0 ^ splitmix64(tag_hash(tag))))
    }

    pub fn index(&self, i: u64) -> Self {
        SeedTree(splitmix64(self.0.rotate_left(17) ^ splitmix64(i.wrapping_add(0x5851_F42D_4C95_7F2D))))
    }

    pub fn value(&self) -> u64 {
        self.0
    }

    pub fn rng(&self) -> StreamRng {
        let mut key = [0u8; 32];
        let mut s = self.0;
        for chunk in key.chunks_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    pub fn stream(&self, tag: &str) -> StreamRng {
        self.child(tag).rng()
    }
}
