//! Counter-based randomness.
//!
//! Every random decision is drawn from a ChaCha8 keystream addressed by
//! `(seed, stream)`; draws within a stream are consumed in a fixed order, so
//! results never depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

pub type StreamRng = ChaCha8Rng;

/// Reserved stream for per-vertex site closures.
pub const SITE_STREAM: u64 = u64::MAX;
/// Reserved stream for per-pair Harris thresholds.
pub const THRESHOLD_STREAM: u64 = u64::MAX - 1;

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id of block `index` at `level` in the coarse recursion.
pub fn block_stream(level: u32, index: u64) -> u64 {
    debug_assert!(index < 1 << 48);
    ((level as u64 + 1) << 48) | index
}

/// Seed of replicate `index` under a master seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Poisson variate: inversion below mean 10, the `rand_distr` rejection
/// sampler above.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    debug_assert!(mean.is_finite() && mean >= 0.0);
    if mean == 0.0 {
        return 0;
    }
    if mean < 10.0 {
        let u: f64 = rng.random();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf && k < 1000 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        return k;
    }
    let d = Poisson::new(mean).expect("finite positive mean");
    d.sample(rng) as u64
}

/// `Exp(1)` variate.
pub fn exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(-u).ln_1p()
}

/// Bernoulli with success probability `1 − exp(−w)`, evaluated without
/// cancellation for small `w`.
pub fn bernoulli_exp<R: Rng + ?Sized>(rng: &mut R, w: f64) -> bool {
    let u: f64 = rng.random();
    u < -(-w).exp_m1()
}
