//! Seeded, splittable random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the root seed; child streams
//! differ only in the ChaCha stream id, so any number of them can be drawn
//! from independently (for example one per Langevin chain) and the output of
//! each is fixed by `(seed, stream id)` alone.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    /// Independent child stream. The result depends only on this stream's
    /// identity and `index`, never on how many values have been drawn.
    pub fn split(&self, index: u64) -> Self {
        let id = splitmix64(self.stream ^ splitmix64(index.wrapping_add(1)));
        Self::with_stream(self.seed, id)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Seed for a separately configured component, fixed by `(seed, index)`.
    pub fn derive_seed(seed: u64, index: u64) -> u64 {
        Self::new(seed).split(index).inner.next_u64()
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.standard_normal();
        }
    }

    /// ±1 with equal probability.
    pub fn rademacher(&mut self) -> f64 {
        if self.inner.next_u32() & 1 == 0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Unbiased integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.inner.next_u64();
            if v <= zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, in selection order.
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot draw {k} of {n} without replacement");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    /// Index drawn with probability proportional to `weights`.
    pub fn choose_weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut target = self.uniform() * total;
        for (i, &w) in weights.iter().enumerate() {
            if target < w {
                return i;
            }
            target -= w;
        }
        // round-off: last index with positive weight
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// `n` draws from N(0, 1).
pub fn standard_normal(rng: &mut RngStream, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.standard_normal()).collect()
}
