//! Seeded randomness: ChaCha8 (counter-based) uniforms and Box–Muller normals.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Clone, Debug)]
pub struct SeededGenerator {
    seed: u64,
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl SeededGenerator {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    /// Uniform on (0, 1].
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * TWO_POW_M53
    }

    pub fn uniform_range(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.uniform()
    }

    /// Index in 0..n by multiply-shift; the bias is below n/2^64.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

/// Standard normal by Box–Muller: with u₁ ∈ (0, 1], u₂ ∈ [0, 1),
/// r = √(−2 ln u₁) and the pair (r cos 2πu₂, r sin 2πu₂). The sine half is
/// returned on the following call.
pub fn standard_normal(gen: &mut SeededGenerator) -> f64 {
    if let Some(z) = gen.spare.take() {
        return z;
    }
    let u1 = gen.uniform_open();
    let u2 = gen.uniform();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    gen.spare = Some(r * s);
    r * c
}
