//! Deterministic pseudo-random numbers for sampling and simulation.
//!
//! Everything random in this crate is derived from [`SplitMix64`], a 64-bit
//! counter-based generator. The `i`-th output (0-based) of a stream seeded
//! with `s` is `mix(s + (i + 1) * 0x9E3779B97F4A7C15)` (wrapping), where
//! `mix` is the SplitMix64 finalizer:
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! Bounded integers use rejection sampling: draw `r`, reject while
//! `r < (2^64 - n) mod n`, return `r mod n`. Uniform reals take the top 53
//! bits of an output scaled by `2^-53`. Streams keyed by several words are
//! seeded with [`derive_seed`]. These definitions are fixed so that subsets
//! and simulated runs reproduce bit-for-bit on any platform.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of words into one stream seed.
///
/// `h_0 = 0`, `h_{i+1} = mix64(h_i ^ (w_i + GOLDEN_GAMMA))`.
pub fn derive_seed(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0u64, |h, &w| mix64(h ^ w.wrapping_add(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return r % n;
            }
        }
    }

    /// Uniform real in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal deviate (Box-Muller, cosine branch).
    pub fn next_gaussian(&mut self) -> f64 {
        // 1 - u keeps the log argument in (0, 1].
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Shuffles the first `prefix` positions of `items` (Fisher-Yates),
    /// leaving the remainder in an unspecified order.
    pub fn shuffle_prefix<T>(&mut self, items: &mut [T], prefix: usize) {
        let n = items.len();
        for i in 0..prefix.min(n) {
            let j = i + self.below((n - i) as u64) as usize;
            items.swap(i, j);
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        let n = items.len();
        self.shuffle_prefix(items, n);
    }
}
