//! Short-time Fourier magnitudes, differentiable through the waveform.

use num_complex::Complex;

use crate::autodiff::{Tape, Var};
use crate::dsp::fft::FftPlan;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Analysis resolution: Hann window of `window_len` samples, advanced by
/// `hop`, zero-padded to `fft_bins`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StftConfig {
    pub fft_bins: usize,
    pub hop: usize,
    pub window_len: usize,
}

impl StftConfig {
    pub fn new(fft_bins: usize, hop: usize, window_len: usize) -> Result<Self> {
        let cfg = Self {
            fft_bins,
            hop,
            window_len,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.fft_bins.is_power_of_two() {
            return Err(Error::NonPowerOfTwoLength(self.fft_bins));
        }
        if self.window_len == 0 || self.window_len > self.fft_bins {
            return Err(Error::InvalidStftConfig(format!(
                "window_len {} must be in 1..={}",
                self.window_len, self.fft_bins
            )));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(Error::InvalidStftConfig(format!(
                "hop {} must be in 1..={}",
                self.hop, self.window_len
            )));
        }
        Ok(())
    }

    /// Number of one-sided frequency bins.
    pub fn bins(&self) -> usize {
        self.fft_bins / 2 + 1
    }

    pub fn frames(&self, len: usize) -> Result<usize> {
        if len < self.window_len {
            return Err(Error::TooShort {
                len,
                min: self.window_len,
            });
        }
        Ok(1 + (len - self.window_len) / self.hop)
    }
}

/// Periodic Hann window.
pub fn hann_window<T: Scalar>(len: usize) -> Vec<T> {
    (0..len)
        .map(|n| {
            let a = 2.0 * std::f64::consts::PI * n as f64 / len as f64;
            T::of(0.5 - 0.5 * a.cos())
        })
        .collect()
}

struct Analysis<T> {
    plan: FftPlan<T>,
    window: Vec<T>,
    cfg: StftConfig,
    frames: usize,
}

impl<T: Scalar> Analysis<T> {
    fn new(len: usize, cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            plan: FftPlan::new(cfg.fft_bins)?,
            window: hann_window(cfg.window_len),
            frames: cfg.frames(len)?,
            cfg,
        })
    }

    fn spectrum(&self, x: &[T], frame: usize, buf: &mut [Complex<T>]) {
        let start = frame * self.cfg.hop;
        for (n, b) in buf.iter_mut().enumerate() {
            *b = if n < self.cfg.window_len {
                Complex::new(x[start + n] * self.window[n], T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            };
        }
        self.plan.process(buf, false).expect("plan length matches");
    }
}

/// Magnitude spectrogram `[frames, fft_bins/2 + 1]` of a waveform.
pub fn stft_magnitude<T: Scalar>(x: &[T], cfg: StftConfig) -> Result<Tensor<T>> {
    let an = Analysis::new(x.len(), cfg)?;
    let bins = cfg.bins();
    let mut out = Vec::with_capacity(an.frames * bins);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); cfg.fft_bins];
    for f in 0..an.frames {
        an.spectrum(x, f, &mut buf);
        out.extend(buf[..bins].iter().map(|c| c.norm()));
    }
    Tensor::new([an.frames, bins], out)
}

impl<T: Scalar> Tape<T> {
    /// Differentiable magnitude STFT of the flattened waveform `x`.
    pub fn stft_magnitude(&mut self, x: Var, cfg: StftConfig) -> Result<Var> {
        let value = stft_magnitude(self.value(x).data(), cfg)?;
        Ok(self.record(
            value,
            &[x],
            Box::new(move |ctx| {
                let xin = ctx.inputs[0].data();
                let an = Analysis::<T>::new(xin.len(), cfg).expect("validated in forward");
                let n = cfg.fft_bins;
                let bins = cfg.bins();
                let scale = T::of(n as f64);
                let g = ctx.grad.data();
                let mut gx = vec![T::zero(); xin.len()];
                let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
                for f in 0..an.frames {
                    an.spectrum(xin, f, &mut buf);
                    // Z_k = G_k X_k / |X_k| on the one-sided bins, zero elsewhere;
                    // d/ds[n] = Re(sum_k Z_k e^{+2 pi i k n / N}).
                    for k in 0..n {
                        buf[k] = if k < bins {
                            let mag = buf[k].norm();
                            if mag > T::zero() {
                                buf[k] * (g[f * bins + k] / mag)
                            } else {
                                Complex::new(T::zero(), T::zero())
                            }
                        } else {
                            Complex::new(T::zero(), T::zero())
                        };
                    }
                    an.plan.process(&mut buf, true).expect("plan length matches");
                    let start = f * cfg.hop;
                    for m in 0..cfg.window_len {
                        gx[start + m] += buf[m].re * scale * an.window[m];
                    }
                }
                vec![Some(Tensor::new(ctx.inputs[0].shape().to_vec(), gx).unwrap())]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_invariants() {
        assert!(StftConfig::new(512, 50, 240).is_ok());
        assert!(StftConfig::new(500, 50, 240).is_err());
        assert!(StftConfig::new(256, 50, 300).is_err());
        assert!(StftConfig::new(512, 300, 240).is_err());
    }

    #[test]
    fn frame_count_formula() {
        let cfg = StftConfig::new(512, 50, 240).unwrap();
        assert_eq!(cfg.frames(240).unwrap(), 1);
        assert_eq!(cfg.frames(1000).unwrap(), 1 + 760 / 50);
        assert!(matches!(cfg.frames(100), Err(Error::TooShort { .. })));
    }

    #[test]
    fn zeros_give_zero_magnitudes() {
        let cfg = StftConfig::new(512, 50, 240).unwrap();
        let m = stft_magnitude(&vec![0.0f64; 1000], cfg).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0));
        assert_eq!(m.shape(), &[16, 257]);
    }

    #[test]
    fn bin_centred_sine_is_concentrated() {
        // Window spans the whole FFT so bin k0 is exactly periodic in the frame.
        let cfg = StftConfig::new(256, 64, 256).unwrap();
        let k0 = 20;
        let x: Vec<f64> = (0..1024)
            .map(|n| (2.0 * std::f64::consts::PI * k0 as f64 * n as f64 / 256.0).sin())
            .collect();
        let m = stft_magnitude(&x, cfg).unwrap();
        for f in 0..m.dim(0) {
            let row = m.row(f);
            let total: f64 = row.iter().map(|v| v * v).sum();
            let peak = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(peak, k0);
            // The periodic Hann main lobe is three bins wide (1 : 1/2 : 1/2 in
            // amplitude), so the peak alone holds 2/3 of the energy.
            let lobe: f64 = row[k0 - 1..=k0 + 1].iter().map(|v| v * v).sum();
            assert!(lobe / total > 0.9);
            assert!((row[k0] * row[k0] / total - 2.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let cfg = StftConfig::new(1024, 120, 600).unwrap();
        let x: Vec<f32> = (0..3000).map(|n| ((n * 7919) % 101) as f32 / 50.0 - 1.0).collect();
        assert_eq!(stft_magnitude(&x, cfg).unwrap(), stft_magnitude(&x, cfg).unwrap());
    }
}
