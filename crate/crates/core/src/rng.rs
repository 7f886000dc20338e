//! Counter-based deterministic random number generation.
//!
//! Every random quantity in the workspace is a pure function of a 64-bit
//! seed and a counter, computed with the splitmix64 finalizer. Because a
//! draw at counter `k` never depends on draws at other counters, noise for
//! parameter coordinate `k` can be produced in any order (or in parallel)
//! with bit-identical results.
//!
//! Gaussian variates use the Box–Muller transform (cosine branch) over two
//! counter-indexed uniforms. This choice is fixed: changing it would change
//! every seeded experiment byte-for-byte.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 output mixing.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a stream label.
#[inline]
pub fn derive(seed: u64, label: u64) -> u64 {
    mix64(seed.wrapping_add(label.wrapping_mul(GOLDEN)).wrapping_add(GOLDEN))
}

/// Derive a child seed from a parent seed and two stream labels.
#[inline]
pub fn derive2(seed: u64, a: u64, b: u64) -> u64 {
    derive(derive(seed, a), b)
}

/// Uniform in `[0, 1)` from 53 mixed bits.
#[inline]
fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw addressed by `(seed, index)`.
///
/// Independent for distinct indices; schedule-independent by construction.
#[inline]
pub fn normal_at(seed: u64, index: u64) -> f64 {
    let h1 = mix64(seed ^ mix64(index.wrapping_mul(2)));
    let h2 = mix64(seed ^ mix64(index.wrapping_mul(2).wrapping_add(1)));
    // u1 in (0, 1] so the log is finite.
    let u1 = ((h1 >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = to_unit(h2);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Sequential stream over a counter; used for shuffles and initialization.
#[derive(Debug, Clone)]
pub struct SeqRng {
    seed: u64,
    counter: u64,
}

impl SeqRng {
    pub fn new(seed: u64) -> Self {
        SeqRng { seed, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = mix64(self.seed ^ mix64(self.counter));
        self.counter += 1;
        out
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        to_unit(self.next_u64())
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`. Modulo bias is ~2^-64·n, irrelevant here.
    #[inline]
    pub fn next_below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box–Muller on the sequential stream.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }
}
