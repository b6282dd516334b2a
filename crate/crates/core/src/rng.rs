//! Deterministic stream derivation for Monte Carlo trials.
//!
//! Every trial gets its own ChaCha stream derived from
//! `(master seed, sweep point, trial, attempt)`, so sweeps are reproducible
//! bit-for-bit regardless of worker count or scheduling.

use crate::scalar::{C, Scalar};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent RNG stream for one (sweep point, trial, attempt) cell.
pub fn stream_rng(master_seed: u64, point: u64, trial: u64, attempt: u64) -> ChaCha12Rng {
    let mut state = master_seed ^ 0x51ed_270b_9f21_d1a7;
    let mut seed = [0u8; 32];
    let words = [
        splitmix64(&mut state),
        splitmix64(&mut state) ^ point.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        splitmix64(&mut state) ^ trial.wrapping_mul(0xc2b2_ae3d_27d4_eb4f),
        splitmix64(&mut state) ^ attempt.wrapping_mul(0x1656_67b1_9e37_79f9),
    ];
    let mut mix = words[0] ^ words[1].rotate_left(17) ^ words[2].rotate_left(31) ^ words[3];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut mix).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}

/// Pair of independent standard-normal samples (Box-Muller).
pub fn standard_normal_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    loop {
        let u1: f64 = rng.gen();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        return (r * theta.cos(), r * theta.sin());
    }
}

/// Circularly-symmetric complex Gaussian with the given total variance
/// (each real component carries half of it).
pub fn complex_gaussian<T: Scalar, R: Rng>(rng: &mut R, variance: f64) -> C<T> {
    let (g1, g2) = standard_normal_pair(rng);
    let s = (variance / 2.0).sqrt();
    Complex::new(T::lit(g1 * s), T::lit(g2 * s))
}
