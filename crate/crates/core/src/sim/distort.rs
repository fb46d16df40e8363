use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{power, AudioBuffer};
use crate::dsp::{convolve_full, design_butterworth, filter_apply};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim::rir::synth_rir;
use crate::sim::spec::{DistortionSpec, FilterFamily};
use crate::sim::derive_seed;

/// Mixtures whose peak exceeds this are scaled down to it.
pub const PEAK_LIMIT: f64 = 0.99;

const RIR_STREAM: u64 = 1;
const MIX_STREAM: u64 = 2;

/// Adds `noise` scaled to `snr_db` below `x`. The noise is read circularly
/// from a seeded offset, so it may be shorter or longer than `x`.
pub fn mix_at_snr<T: Scalar>(x: &[T], noise: &[T], snr_db: f64, seed: u64) -> Result<Vec<T>> {
    let px = power(x);
    if px == 0.0 {
        return Err(Error::SilentClean);
    }
    if noise.is_empty() {
        return Err(Error::SilentNoise);
    }
    let offset = ChaCha8Rng::seed_from_u64(seed).random_range(0..noise.len());
    let seg: Vec<f64> = (0..x.len()).map(|i| noise[(offset + i) % noise.len()].as_f64()).collect();
    let pn = power(&seg);
    if pn == 0.0 {
        return Err(Error::SilentNoise);
    }
    let g = (px / (pn * 10f64.powf(snr_db / 10.0))).sqrt();
    Ok(x.iter().zip(&seg).map(|(&v, &n)| T::of(v.as_f64() + g * n)).collect())
}

/// Reverberation, then band-limiting, then additive noise, each applied
/// only when present in `spec`.
pub fn apply_distortion<T: Scalar>(
    x: &AudioBuffer<T>,
    spec: &DistortionSpec,
    noise: &AudioBuffer<T>,
) -> Result<AudioBuffer<T>> {
    if noise.sample_rate != x.sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: x.sample_rate,
            got: noise.sample_rate,
        });
    }
    let mut y: Vec<f64> = x.samples.iter().map(|v| v.as_f64()).collect();
    if let Some(rir) = spec.rir {
        let r = synth_rir(rir.t60, rir.length, derive_seed(spec.seed, RIR_STREAM), x.sample_rate);
        y = convolve_full(&y, &r)?;
    }
    if let Some(b) = spec.bandlimit {
        if b.family != FilterFamily::Butterworth {
            return Err(Error::Unsupported(format!("{:?} filters", b.family)));
        }
        let c = design_butterworth(b.order, b.cutoff, x.sample_rate as f64, b.kind)?;
        y = filter_apply(&c, &y);
    }
    if let Some(snr) = spec.snr_db {
        let n: Vec<f64> = noise.samples.iter().map(|v| v.as_f64()).collect();
        y = mix_at_snr(&y, &n, snr, derive_seed(spec.seed, MIX_STREAM))?;
    }
    Ok(AudioBuffer::new(y.into_iter().map(T::of).collect(), x.sample_rate))
}

/// Scales `y` down to `PEAK_LIMIT` if its peak exceeds it; returns the gain.
pub fn peak_guard<T: Scalar>(y: &mut [T]) -> f64 {
    let peak = y.iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
    if peak <= PEAK_LIMIT {
        return 1.0;
    }
    let g = PEAK_LIMIT / peak;
    y.iter_mut().for_each(|v| *v = T::of(v.as_f64() * g));
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{stft_magnitude, Cutoff, FilterKind, StftConfig};
    use crate::sim::spec::{sample_spec, Bandlimit, RirSpec, Split, Subset};
    use crate::sim::synthetic_noise;
    use rand_distr::{Distribution, StandardNormal};

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn snr_of(x: &[f64], y: &[f64]) -> f64 {
        let n: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        10.0 * (power(x) / power(&n)).log10()
    }

    #[test]
    fn gain_examples() {
        let x = vec![1.0f64, -1.0, 1.0, -1.0];
        let n = vec![1.0, 1.0, -1.0, -1.0];
        let y = mix_at_snr(&x, &n, 0.0, 0).unwrap();
        let g0 = (y[0] - x[0]).abs();
        assert!((g0 - 1.0).abs() < 1e-15);
        let y = mix_at_snr(&x, &n, 10.0, 0).unwrap();
        assert!(((y[1] - x[1]).abs() - 10f64.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn achieved_snr_matches_target() {
        for (k, snr) in [0.0, 5.0, 10.0, 15.0, 2.5, 7.5, 12.5, 17.5].into_iter().enumerate() {
            let x: Vec<f64> = white(4000, k as u64).iter().map(|v| 0.1 * v).collect();
            let n = synthetic_noise(3000, k as u64 + 100, 16_000);
            let y = mix_at_snr(&x, &n, snr, 9).unwrap();
            assert!((snr_of(&x, &y) - snr).abs() < 0.1);
        }
    }

    #[test]
    fn silent_inputs_rejected() {
        assert!(matches!(mix_at_snr(&[0.0; 4], &[1.0; 4], 0.0, 0), Err(Error::SilentClean)));
        assert!(matches!(mix_at_snr(&[1.0; 4], &[0.0; 4], 0.0, 0), Err(Error::SilentNoise)));
    }

    #[test]
    fn empty_spec_is_identity() {
        let x = AudioBuffer::new(white(500, 1), 16_000);
        let n = AudioBuffer::new(white(500, 2), 16_000);
        let y = apply_distortion(&x, &DistortionSpec::clean(0, Subset::N), &n).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn noise_only_difference_is_scaled_noise() {
        let x = AudioBuffer::new(white(800, 3), 16_000);
        let n = AudioBuffer::new(white(800, 4), 16_000);
        let spec = sample_spec(Subset::N, Split::Test, 5);
        let y = apply_distortion(&x, &spec, &n).unwrap();
        let d: Vec<f64> = y.samples.iter().zip(&x.samples).map(|(a, b)| a - b).collect();
        // d must be g * (circularly shifted n) for a single g.
        let offset = ChaCha8Rng::seed_from_u64(derive_seed(5, MIX_STREAM)).random_range(0..800);
        let seg: Vec<f64> = (0..800).map(|i| n.samples[(offset + i) % 800]).collect();
        let g = (power(&x.samples) / (power(&seg) * 10f64.powf(spec.snr_db.unwrap() / 10.0))).sqrt();
        for (a, b) in d.iter().zip(&seg) {
            assert!((a - g * b).abs() < 1e-12);
        }
    }

    #[test]
    fn lowpass_suppresses_upper_band() {
        let x = AudioBuffer::new(white(32_000, 6), 16_000);
        let mut spec = DistortionSpec::clean(1, Subset::B);
        for fc in [4000.0, 5000.0, 6000.0, 7000.0] {
            spec.bandlimit = Some(Bandlimit {
                family: FilterFamily::Butterworth,
                kind: FilterKind::Lowpass,
                order: 8,
                cutoff: Cutoff::Single(fc),
            });
            let y = apply_distortion(&x, &spec, &x).unwrap();
            let cfg = StftConfig::new(512, 128, 512).unwrap();
            let band = |s: &[f64]| {
                let m = stft_magnitude(s, cfg).unwrap();
                let lo = ((fc + 1000.0) / 16_000.0 * 512.0).ceil() as usize;
                let bins = cfg.bins();
                m.data()
                    .chunks(bins)
                    .map(|row| row[lo.min(bins - 1)..].iter().map(|v| v * v).sum::<f64>())
                    .sum::<f64>()
            };
            let att = 10.0 * (band(&x.samples) / band(&y.samples)).log10();
            assert!(att >= 20.0, "{fc}: {att}");
        }
    }

    #[test]
    fn non_butterworth_unsupported() {
        let x = AudioBuffer::new(white(100, 1), 16_000);
        let mut spec = DistortionSpec::clean(1, Subset::B);
        spec.bandlimit = Some(Bandlimit {
            family: FilterFamily::Elliptic,
            kind: FilterKind::Lowpass,
            order: 4,
            cutoff: Cutoff::Single(4000.0),
        });
        assert!(matches!(apply_distortion(&x, &spec, &x), Err(Error::Unsupported(_))));
    }

    #[test]
    fn all_distortions_differ_from_noise_only() {
        let x = AudioBuffer::new(white(4000, 7).iter().map(|v| 0.1 * v).collect(), 16_000);
        let n = AudioBuffer::new(synthetic_noise(4000, 8, 16_000), 16_000);
        let a = apply_distortion(&x, &sample_spec(Subset::A, Split::Test, 3), &n).unwrap();
        let nn = apply_distortion(&x, &sample_spec(Subset::N, Split::Test, 3), &n).unwrap();
        assert_ne!(a, nn);
        let mut spec = DistortionSpec::clean(2, Subset::R);
        spec.rir = Some(RirSpec::from_t60(0.3, 16_000));
        let r = apply_distortion(&x, &spec, &n).unwrap();
        assert_eq!(r.len(), x.len());
    }

    #[test]
    fn peak_guard_limits() {
        let mut y = vec![0.5f64, -2.0, 1.0];
        let g = peak_guard(&mut y);
        assert!((g - 0.495).abs() < 1e-15);
        assert!((y[1] + 0.99).abs() < 1e-15);
        let mut z = vec![0.1f64, -0.3];
        assert_eq!(peak_guard(&mut z), 1.0);
        assert_eq!(z, vec![0.1, -0.3]);
    }
}
