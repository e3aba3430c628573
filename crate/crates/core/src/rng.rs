//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(seed, stream, index)`, computed with
//! Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
//! The 64-bit seed is the Philox key; the 128-bit counter is `(index, stream)`
//! with `index` in the low words. One block yields four 32-bit words, exposed
//! as two `u64` values (`lo = w1:w0`, `hi = w3:w2`).

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = (a as u64) * (b as u64);
    ((p >> 32) as u32, p as u32)
}

/// Raw Philox4x32 with 10 rounds.
pub fn philox4x32_10(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = ctr;
    let mut k = key;
    for r in 0..10 {
        if r > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// A keyed random-access stream family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: [u32; 2],
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng {
            key: [seed as u32, (seed >> 32) as u32],
        }
    }

    /// Both 64-bit words of block `(stream, index)`.
    #[inline]
    pub fn block(&self, stream: u64, index: u64) -> [u64; 2] {
        let w = philox4x32_10(
            [index as u32, (index >> 32) as u32, stream as u32, (stream >> 32) as u32],
            self.key,
        );
        [
            (w[0] as u64) | ((w[1] as u64) << 32),
            (w[2] as u64) | ((w[3] as u64) << 32),
        ]
    }

    /// Word `word` (0 or 1) of block `(stream, index)`.
    #[inline]
    pub fn u64_at(&self, stream: u64, index: u64, word: usize) -> u64 {
        self.block(stream, index)[word & 1]
    }

    /// Uniform on [0,1) with 53 random bits.
    #[inline]
    pub fn f64_at(&self, stream: u64, index: u64, word: usize) -> f64 {
        to_unit_f64(self.u64_at(stream, index, word))
    }

    /// Uniform integer in `[0, n)` by rejection over successive blocks of
    /// stream `stream` starting at `index`; the second word of each block is
    /// used only after the first is rejected.
    pub fn below(&self, stream: u64, index: u64, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n + 1) % n;
        let mut i = index;
        loop {
            for w in self.block(stream, i) {
                if w <= zone {
                    return w % n;
                }
            }
            i = i.wrapping_add(1u64 << 40);
        }
    }
}

/// Top 53 bits of `u` as a dyadic rational in [0,1).
#[inline]
pub fn to_unit_f64(u: u64) -> f64 {
    (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Open-interval uniform in (0,1], for logarithms.
#[inline]
pub fn to_open_unit_f64(u: u64) -> f64 {
    ((u >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

/// Deterministic 64-bit mixing of a word sequence into a stream id.
pub fn hash_words(seed: u64, words: &[u64]) -> u64 {
    let rng = CounterRng::new(seed ^ 0x5bd1_e995_d3c1_7a2b);
    let mut h = 0x243f_6a88_85a3_08d3u64;
    for (i, &w) in words.iter().enumerate() {
        h = rng.block(h ^ (i as u64).rotate_left(17), w)[0];
    }
    h
}

/// Poisson(λ) by inversion of a single uniform; exact up to f64 rounding.
pub fn poisson_inverse(lambda: f64, u: f64) -> u64 {
    assert!(lambda >= 0.0 && lambda.is_finite());
    if lambda == 0.0 {
        return 0;
    }
    if lambda > 500.0 {
        // Normal approximation with continuity correction; only used for
        // very large means where the count is then clamped at zero.
        let z = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * u);
        let v = (lambda + z * lambda.sqrt() + 0.5).floor();
        return v.max(0.0) as u64;
    }
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut k = 0u64;
    while u > cdf && k < 100_000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
        if p == 0.0 && cdf < u {
            break;
        }
    }
    k
}
