//! Deterministic signal-processing primitives.

pub mod convolve;
pub mod fft;
pub mod iir;
pub mod resample;
pub mod stft;

pub use convolve::convolve_full;
pub use fft::{fft, FftPlan};
pub use iir::{design_butterworth, filter_apply, Biquad, BiquadCascade, Cutoff, FilterKind};
pub use resample::{downsample4, upsample4, RESAMPLE_FACTOR};
pub use stft::{hann_window, stft_magnitude, StftConfig};
