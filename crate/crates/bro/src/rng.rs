//! Deterministic, splittable random streams.
//!
//! Every sampling operation in this crate takes an explicit [`Stream`]; there
//! is no global RNG state. A stream is identified by a 64-bit key. Child
//! streams are derived by hashing the parent key with a tag, so substreams for
//! `(seed, stage, n, replication)` can be reconstructed independently of
//! execution order. This is what makes parallel replication runs byte-identical
//! to serial ones.
//!
//! The generator core is ChaCha8, which is stable across platforms and rustc
//! versions. Not cryptographically secure in this usage; reproducibility only.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over raw bytes. Used for tag and config hashing.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finalizer; bijective avalanche over u64.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn combine(key: u64, tag: u64) -> u64 {
    mix(key ^ mix(tag))
}

/// A seedable, splittable random stream.
#[derive(Debug, Clone)]
pub struct Stream {
    key: u64,
    rng: ChaCha8Rng,
}

impl Stream {
    /// Root stream for a run.
    pub fn from_seed(seed: u64) -> Self {
        Self::from_key(mix(seed))
    }

    /// Stream with an explicit derived key (see [`Stream::child_key`]).
    pub fn from_key(key: u64) -> Self {
        let mut seed = [0u8; 32];
        let mut k = key;
        for chunk in seed.chunks_exact_mut(8) {
            k = mix(k);
            chunk.copy_from_slice(&k.to_le_bytes());
        }
        Self {
            key,
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    /// Identity of this stream; derivation uses the key, never the position,
    /// so children are independent of how much the parent has been consumed.
    pub fn key(&self) -> u64 {
        self.key
    }

    /// Derive a child stream by string tag.
    pub fn child(&self, tag: &str) -> Stream {
        Stream::from_key(combine(self.key, fnv1a(tag.as_bytes())))
    }

    /// Derive a child stream by integer tag (replication index, n, ...).
    pub fn child_u64(&self, tag: u64) -> Stream {
        Stream::from_key(combine(self.key, tag))
    }

    /// Key a child stream would have, without instantiating it.
    pub fn child_key(&self, tag: &str) -> u64 {
        combine(self.key, fnv1a(tag.as_bytes()))
    }

    /// Uniform on `[0, 1)` with 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`; safe to feed through inverse
    /// CDFs without producing infinities.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest);
    }
}
