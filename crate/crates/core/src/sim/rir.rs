use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Energy of the reverberant tail relative to the direct path.
pub const TAIL_TO_DIRECT: f64 = 3.0;

/// Amplitude envelope `10^(-3 t / t60)`: -60 dB at `t = t60`.
pub fn rir_envelope(t_seconds: f64, t60: f64) -> f64 {
    10f64.powf(-3.0 * t_seconds / t60)
}

/// Synthetic room response: a unit direct path followed by seeded Gaussian
/// noise under an exponential decay. The tail is scaled to carry
/// `TAIL_TO_DIRECT` times the direct-path energy, so the total energy is at
/// most four times the direct path.
pub fn synth_rir(t60: f64, length: usize, seed: u64, sample_rate: u32) -> Vec<f64> {
    assert!(t60 > 0.0, "t60 must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = sample_rate as f64;
    let mut r: Vec<f64> = (0..length.max(1))
        .map(|n| {
            let z: f64 = StandardNormal.sample(&mut rng);
            if n == 0 {
                1.0
            } else {
                z * rir_envelope(n as f64 / sr, t60)
            }
        })
        .collect();
    let tail: f64 = r[1..].iter().map(|v| v * v).sum();
    if tail > 0.0 {
        let g = (TAIL_TO_DIRECT / tail).sqrt();
        r[1..].iter_mut().for_each(|v| *v *= g);
    }
    r
}
