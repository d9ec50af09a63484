//! Seeded random streams.
//!
//! Every stream is ChaCha8 (RFC 7539 block function with 8 rounds) keyed by
//! `seed` through SplitMix64, as implemented by `rand_chacha`. Substreams use
//! the ChaCha stream id, so replicate `r` of seed `s` is the same sequence
//! no matter how many replicates are run or in which order.
//!
//! Derived variates are computed here rather than through `rand_distr` so the
//! exact transformation is fixed:
//! - uniform: top 53 bits of a `u64` scaled by 2^-53, in `[0, 1)`;
//! - normal: Box-Muller cosine branch, `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`;
//! - index in `0..m`: `floor(u * m)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Stream(ChaCha8Rng);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Independent substream `index` of `seed`.
    pub fn substream(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Stream(rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn index(&mut self, m: usize) -> usize {
        ((self.uniform() * m as f64) as usize).min(m - 1)
    }

    /// Fisher-Yates shuffle from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..m`, sorted ascending.
    pub fn sample_without_replacement(&mut self, m: usize, k: usize) -> Vec<usize> {
        assert!(k <= m, "cannot draw {k} of {m} without replacement");
        let mut pool: Vec<usize> = (0..m).collect();
        // partial Fisher-Yates from the front
        for i in 0..k {
            let j = i + self.index(m - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool.sort_unstable();
        pool
    }
}
