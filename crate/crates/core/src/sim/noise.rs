use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Seeded coloured noise: Gaussian white noise through a one-pole lowpass
/// with a random pole in `[0, 0.95]`, plus a slow random amplitude
/// modulation so the noise is not stationary.
pub fn synthetic_noise(len: usize, seed: u64, sample_rate: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pole: f64 = rng.random_range(0.0..=0.95);
    let mod_hz: f64 = rng.random_range(0.1..2.0);
    let mod_depth: f64 = rng.random_range(0.0..0.5);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mut state = 0.0;
    (0..len)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            state = pole * state + (1.0 - pole) * z;
            let t = i as f64 / sample_rate as f64;
            state * (1.0 + mod_depth * (std::f64::consts::TAU * mod_hz * t + phase).sin())
        })
        .collect()
}
