//! Seed handling shared by every stochastic routine.
//!
//! All randomness flows through [`ChaCha8Rng`]. A master seed selects the key
//! and an integer counter selects the ChaCha stream, so independent workers
//! draw from disjoint streams without coordinating: block `b` of a Monte Carlo
//! run uses `stream(seed, b)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::C64;

/// Generator for `seed`, stream 0.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for `seed` positioned on stream `counter`.
pub fn stream(seed: u64, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(counter);
    rng
}

/// SplitMix64 finalizer. Used to derive child seeds from a master seed and a
/// path of integer labels.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `(master, labels[0], labels[1], ...)`.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(mix64(master), |acc, &l| mix64(acc ^ mix64(l)))
}

/// Standard circularly-symmetric complex Gaussian sample, `E|z|² = 1`.
/// Draws the real part first, then the imaginary part.
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
