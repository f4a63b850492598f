//! Seeded randomness with labeled derivation.
//!
//! One global `u64` seed drives an entire experiment. Each pipeline stage
//! derives its own child generator from the parent's *seed* (never its stream
//! position), so stages can rerun independently and still reproduce exactly.

use rand::distributions::Standard;
use rand::seq::SliceRandom;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

/// A ChaCha-backed generator that remembers the seed it was built from.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha12Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Name of the backing stream algorithm.
    pub fn algorithm(&self) -> &'static str {
        "chacha12"
    }

    /// Child generator for a named stage. Depends only on the parent seed and
    /// the label, not on how much the parent has already been used.
    pub fn derive(&self, label: &str) -> Self {
        Self::new(splitmix(self.seed ^ fnv1a(label.as_bytes())))
    }

    /// Child generator for the `index`-th item of a named stage.
    pub fn derive_indexed(&self, label: &str, index: u64) -> Self {
        Self::new(splitmix(
            self.seed ^ fnv1a(label.as_bytes()) ^ splitmix(index.wrapping_add(0x9e37)),
        ))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.sample(Standard)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Inclusive integer range.
    pub fn int_range(&mut self, lo: usize, hi: usize) -> usize {
        self.inner.gen_range(lo..=hi)
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        Normal::new(mean, sd)
            .expect("standard deviation must be finite and non-negative")
            .sample(&mut self.inner)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// Index drawn proportionally to `weights`; `None` when no weight is
    /// positive.
    pub fn weighted(&mut self, weights: &[f64]) -> Option<usize> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let mut t = self.unit() * total;
        for (i, w) in weights.iter().enumerate() {
            if *w > 0.0 {
                t -= w;
                if t < 0.0 {
                    return Some(i);
                }
            }
        }
        weights.iter().rposition(|w| *w > 0.0)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}
