//! Deterministic pseudo-random numbers.
//!
//! The generator is xoshiro256** (Blackman & Vigna), seeded by expanding a
//! 64-bit seed through SplitMix64. Both algorithms are tiny and fully
//! specified, so a port in any language reproduces the same streams:
//!
//! * `next_u64`: xoshiro256** output.
//! * `next_f64`: `(next_u64() >> 11) * 2^-53`, uniform on `[0, 1)`.
//! * `normal`: Box–Muller on two uniforms, `u1` mapped to `(0, 1]`; one
//!   variate per call, the sine branch is discarded.
//! * `below(n)`: Lemire's multiply-shift with rejection.
//! * `child(stream)`: a new generator seeded with
//!   `splitmix64(seed ^ splitmix64(stream + 1))`, a function of the parent
//!   *seed* only, so children are independent of how much the parent was used.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 step applied to `x` as a pure mixing function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
    s: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut x = seed;
        let mut s = [0u64; 4];
        for slot in &mut s {
            *slot = splitmix64(x);
            x = x.wrapping_add(GOLDEN);
        }
        // xoshiro must not start from the all-zero state; splitmix64 never
        // yields four zeros in a row but keep the invariant explicit.
        if s == [0; 4] {
            s[0] = GOLDEN;
        }
        Rng { seed, s }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child generator for an independent sub-stream.
    pub fn child(&self, stream: u64) -> Rng {
        Rng::new(splitmix64(self.seed ^ splitmix64(stream.wrapping_add(1))))
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    /// Fisher–Yates, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}

/// Tensor of i.i.d. normal draws.
pub fn rng_normal(rng: &mut Rng, mean: f64, std: f64, shape: &[usize]) -> Result<Tensor> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::param(format!("standard deviation must be >= 0, got {std}")));
    }
    let mut t = Tensor::new(shape, mean)?;
    if std > 0.0 {
        for v in t.data_mut() {
            *v = rng.normal(mean, std);
        }
    }
    Ok(t)
}
