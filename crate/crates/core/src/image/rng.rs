//! Keyed random streams.
//!
//! A stream is identified by `(seed, epoch, sample_id, stage_tag)`. The key is
//! hashed with SHA-256 into a ChaCha8 seed, so a stream's draws depend on the
//! key alone and never on the order in which streams are created. There is no
//! other source of randomness in the crate.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const DOMAIN_TAG: &[u8] = b"mitoaug.rng.v1\0";

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub epoch: u64,
    pub sample_id: u64,
    pub stage_tag: String,
}

impl StreamKey {
    pub fn new(seed: u64, epoch: u64, sample_id: u64, stage_tag: impl Into<String>) -> Self {
        Self {
            seed,
            epoch,
            sample_id,
            stage_tag: stage_tag.into(),
        }
    }

    /// Same sample and epoch, different stage.
    pub fn with_tag(&self, stage_tag: impl Into<String>) -> Self {
        Self {
            stage_tag: stage_tag.into(),
            ..self.clone()
        }
    }

    fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(DOMAIN_TAG);
        h.update(self.seed.to_le_bytes());
        h.update(self.epoch.to_le_bytes());
        h.update(self.sample_id.to_le_bytes());
        h.update((self.stage_tag.len() as u64).to_le_bytes());
        h.update(self.stage_tag.as_bytes());
        h.finalize().into()
    }
}

/// A deterministic draw sequence bound to a [`StreamKey`].
///
/// Derived draws are implemented here on top of raw `u64` output rather than
/// through a distribution library, so that their exact values are pinned:
///
/// * `uniform`: top 53 bits of one `u64`, scaled by 2^-53, in `[0, 1)`.
/// * `int_inclusive(lo, hi)`: `lo + floor(uniform * (hi - lo + 1))`.
/// * `normal`: Box-Muller cosine branch on two uniforms, no caching.
#[derive(Clone, Debug)]
pub struct RngStream {
    key: StreamKey,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(key: StreamKey) -> Self {
        let inner = ChaCha8Rng::from_seed(key.digest());
        Self { key, inner }
    }

    pub fn key(&self) -> &StreamKey {
        &self.key
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi]`; the result is clamped into the closed interval.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        (lo + (hi - lo) * self.uniform()).clamp(lo.min(hi), hi.max(lo))
    }

    pub fn int_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo + 1) as f64;
        (lo + (self.uniform() * span).floor() as i64).min(hi)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.int_inclusive(0, n as i64 - 1) as usize
    }

    /// Bernoulli trial; always consumes exactly one draw.
    pub fn chance(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

pub fn make_rng(seed: u64, epoch: u64, sample_id: u64, stage_tag: &str) -> RngStream {
    RngStream::new(StreamKey::new(seed, epoch, sample_id, stage_tag))
}
