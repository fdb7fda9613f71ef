//! Deterministic random number generation.
//!
//! Permutation streams must be bit-reproducible across platforms and over
//! time, so instead of depending on an external RNG crate whose output may
//! change between releases, this module fixes the generator algorithm:
//! SplitMix64 (Steele, Lea & Flood's `splitmix64`), i.e. a 64-bit Weyl
//! sequence with increment `0x9E3779B97F4A7C15` passed through a
//! xor-shift-multiply finalizer. Bounded sampling uses Lemire's unbiased
//! multiply-shift rejection method, and shuffling is plain Fisher–Yates.

/// SplitMix64 generator state.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The `splitmix64` output finalizer (a bijection on `u64`).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// A generator for epoch `t` of a run seeded with `seed`.
    ///
    /// Streams for distinct `(seed, t)` pairs are decorrelated by running the
    /// pair through the finalizer twice, so each epoch draws from its own
    /// counter-based stream regardless of how many values earlier epochs
    /// consumed.
    pub fn for_epoch(seed: u64, t: usize) -> Self {
        SplitMix64::new(mix64(mix64(seed).wrapping_add(t as u64)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform sample from `0..bound` without modulo bias (Lemire rejection).
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        let mut x = self.next_u64();
        let mut m = (x as u128) * (bound as u128);
        let mut low = m as u64;
        if low < bound {
            let threshold = bound.wrapping_neg() % bound;
            while low < threshold {
                x = self.next_u64();
                m = (x as u128) * (bound as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box–Muller.
    pub fn next_gaussian(&mut self) -> f64 {
        let mut u = self.next_f64();
        // avoid ln(0)
        while u == 0.0 {
            u = self.next_f64();
        }
        let v = self.next_f64();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    /// Fisher–Yates shuffle producing a permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.next_below((i + 1) as u64) as usize;
            p.swap(i, j);
        }
        p
    }

    /// Uniform point in the Euclidean ball of the given radius (gaussian
    /// direction, radius scaled by `u^{1/n}`).
    pub fn point_in_ball(&mut self, dim: usize, radius: f64) -> Vec<f64> {
        let dir: Vec<f64> = (0..dim).map(|_| self.next_gaussian()).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return vec![0.0; dim];
        }
        let r = radius * self.next_f64().powf(1.0 / dim as f64);
        dir.into_iter().map(|v| v * r / norm).collect()
    }
}
