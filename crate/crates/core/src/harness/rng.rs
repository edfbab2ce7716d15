//! The one random stream used for data generation.
//!
//! Generator: ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded with
//! `seed_from_u64`. Uniforms are `(next_u64() >> 11) * 2^-53`, in `[0, 1)`.
//! Normals use the cosine branch of Box-Muller with `u1 = 1 - uniform()`
//! and `u2 = uniform()`, drawn in that order. Nothing else touches the
//! stream, so a port that reproduces these three rules reproduces every
//! dataset.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
