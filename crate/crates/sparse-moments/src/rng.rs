//! Seeded counter-based random number generation.
//!
//! Every randomized operation in this crate takes an explicit seed and derives
//! values from a 64-bit counter stream, so identical inputs produce identical
//! outputs and parallel consumers can split non-overlapping streams without
//! shared state.

/// Counter-based generator: the output at position `n` is a pure function of
/// `(key, n)`, so streams can be forked cheaply and replayed exactly.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    ctr: u64,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng {
            key: mix(seed ^ GOLDEN),
            ctr: 0,
        }
    }

    /// Derive an independent stream from the same seed. Streams with distinct
    /// ids never collide with each other or with the base stream.
    pub fn stream(seed: u64, stream_id: u64) -> Self {
        CounterRng {
            key: mix(mix(seed ^ GOLDEN).wrapping_add(stream_id.wrapping_mul(GOLDEN) | 1)),
            ctr: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = mix(self.key.wrapping_add(self.ctr.wrapping_mul(GOLDEN)));
        self.ctr = self.ctr.wrapping_add(1);
        out
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Box-Muller. Uses two counter steps per draw.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform().max(f64::MIN_POSITIVE);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle of `0..n` written into `buf`.
    pub fn permutation(&mut self, n: usize, buf: &mut Vec<usize>) {
        buf.clear();
        buf.extend(0..n);
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            buf.swap(i, j);
        }
    }
}

/// Stable 64-bit fingerprint of a float slice, used to derive per-query noise
/// streams that do not depend on query order.
pub fn fingerprint(data: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &x in data {
        h ^= x.to_bits();
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}
