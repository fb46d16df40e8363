//! Mono audio buffers and PCM WAV I/O.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer<T> {
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Scalar> AudioBuffer<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn power(&self) -> f64 {
        power(&self.samples)
    }

    pub fn cast<U: Scalar>(&self) -> AudioBuffer<U> {
        AudioBuffer {
            samples: self.samples.iter().map(|v| U::of(v.as_f64())).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Mean square.
pub fn power<T: Scalar>(x: &[T]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn std_dev<T: Scalar>(x: &[T]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let n = x.len() as f64;
    let mean = x.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    (x.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Reads a mono (or first channel of a multichannel) PCM WAV as floats in [-1, 1].
pub fn read_wav<T: Scalar>(path: impl AsRef<Path>) -> Result<AudioBuffer<T>> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let samples: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        hound::SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
    };
    let samples = samples.into_iter().step_by(channels).map(T::of).collect();
    Ok(AudioBuffer::new(samples, spec.sample_rate))
}

/// Writes 16-bit mono PCM, clamping to [-1, 1].
pub fn write_wav<T: Scalar>(path: impl AsRef<Path>, buf: &AudioBuffer<T>) -> Result<()> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in &buf.samples {
        w.write_sample(quantize16(s.as_f64())).map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}

/// Mono 32-bit float WAV, unclamped. Used for diagnostic signals whose range
/// is not limited to [-1, 1].
pub fn write_wav_float<T: Scalar>(path: impl AsRef<Path>, buf: &AudioBuffer<T>) -> Result<()> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in &buf.samples {
        w.write_sample(s.as_f64() as f32).map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}

/// Same 2^15 scale as the reader, so a read-write cycle is lossless.
pub fn quantize16(v: f64) -> i16 {
    (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_round_trip_is_quantized_identity() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let x: Vec<f64> = (0..500).map(|i| (i as f64 * 0.01).sin() * 0.9).collect();
        write_wav(&p, &AudioBuffer::new(x.clone(), 16_000)).unwrap();
        let y: AudioBuffer<f64> = read_wav(&p).unwrap();
        assert_eq!(y.sample_rate, 16_000);
        assert_eq!(y.len(), 500);
        for (a, b) in x.iter().zip(&y.samples) {
            assert!((a - b).abs() <= 0.5 / 32768.0);
        }
        // A second write of the read-back signal is byte-identical.
        let q = dir.path().join("b.wav");
        write_wav(&q, &y).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
    }

    #[test]
    fn quantizer_clamps_to_full_scale() {
        assert_eq!(quantize16(1.0), 32767);
        assert_eq!(quantize16(-1.0), -32768);
        assert_eq!(quantize16(5.0), 32767);
        assert_eq!(quantize16(0.5), 16384);
    }

    #[test]
    fn reads_24_bit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(1 << 22).unwrap();
        w.write_sample(-(1 << 23)).unwrap();
        w.finalize().unwrap();
        let y: AudioBuffer<f64> = read_wav(&p).unwrap();
        assert_eq!(y.samples, vec![0.5, -1.0]);
    }

    #[test]
    fn float_wav_keeps_out_of_range_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let x = vec![0.25f32, -3.5, 7.0, 1e-6];
        write_wav_float(&p, &AudioBuffer::new(x.clone(), 64_000)).unwrap();
        let y: AudioBuffer<f32> = read_wav(&p).unwrap();
        assert_eq!(y.sample_rate, 64_000);
        assert_eq!(y.samples, x);
    }

    #[test]
    fn missing_file_names_path() {
        let e = read_wav::<f32>("/nonexistent/x.wav").unwrap_err();
        assert!(e.to_string().contains("/nonexistent/x.wav"));
    }

    #[test]
    fn std_of_constant_is_zero() {
        assert_eq!(std_dev(&[3.0f64; 10]), 0.0);
        assert!((std_dev(&[1.0f64, -1.0]) - 1.0).abs() < 1e-15);
    }
}
