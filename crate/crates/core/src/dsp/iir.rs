//! Butterworth design by bilinear transform, realised as biquad cascades.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FilterKind {
    Lowpass,
    Highpass,
    Bandpass,
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterKind::Lowpass => "lowpass",
            FilterKind::Highpass => "highpass",
            FilterKind::Bandpass => "bandpass",
        })
    }
}

impl FromStr for FilterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowpass" => Ok(FilterKind::Lowpass),
            "highpass" => Ok(FilterKind::Highpass),
            "bandpass" => Ok(FilterKind::Bandpass),
            other => Err(Error::Unsupported(format!("filter kind {other}"))),
        }
    }
}

/// Cutoff frequency in Hz; bandpass filters take `(low, high)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cutoff {
    Single(f64),
    Band(f64, f64),
}

/// One second-order section, `a0` normalised to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Largest pole magnitude (roots of `z^2 + a1 z + a2`).
    pub fn pole_radius(&self) -> f64 {
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc < 0.0 {
            self.a2.sqrt()
        } else {
            let s = disc.sqrt();
            ((-self.a1 + s) / 2.0).abs().max(((-self.a1 - s) / 2.0).abs())
        }
    }

    fn response(&self, w: f64) -> f64 {
        // |B(e^{jw})| / |A(e^{jw})|
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let (nr, ni) = (self.b0 + self.b1 * c1 + self.b2 * c2, -(self.b1 * s1 + self.b2 * s2));
        let (dr, di) = (1.0 + self.a1 * c1 + self.a2 * c2, -(self.a1 * s1 + self.a2 * s2));
        ((nr * nr + ni * ni) / (dr * dr + di * di)).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiquadCascade {
    pub sections: Vec<Biquad>,
    pub order: usize,
    pub kind: FilterKind,
    pub cutoff: Cutoff,
    pub sample_rate: f64,
}

impl BiquadCascade {
    /// Magnitude response at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate;
        self.sections.iter().map(|s| s.response(w)).product()
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.magnitude_at(freq_hz).log10()
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.sections.iter().map(Biquad::pole_radius).fold(0.0, f64::max)
    }
}

/// Q factors of the conjugate analog pole pairs of an even-order prototype.
fn butterworth_q(order: usize) -> impl Iterator<Item = f64> {
    (0..order / 2).map(move |k| 1.0 / (2.0 * (PI * (2 * k + 1) as f64 / (2 * order) as f64).sin()))
}

fn sections(order: usize, cutoff_hz: f64, sr_hz: f64, highpass: bool) -> Result<Vec<Biquad>> {
    if !(cutoff_hz > 0.0 && cutoff_hz < sr_hz / 2.0) {
        return Err(Error::InvalidCutoff { cutoff_hz, sr_hz });
    }
    // Prewarped analog cutoff for the bilinear map.
    let k = (PI * cutoff_hz / sr_hz).tan();
    let k2 = k * k;
    Ok(butterworth_q(order)
        .map(|q| {
            let norm = 1.0 / (1.0 + k / q + k2);
            let a1 = 2.0 * (k2 - 1.0) * norm;
            let a2 = (1.0 - k / q + k2) * norm;
            if highpass {
                Biquad { b0: norm, b1: -2.0 * norm, b2: norm, a1, a2 }
            } else {
                let b0 = k2 * norm;
                Biquad { b0, b1: 2.0 * b0, b2: b0, a1, a2 }
            }
        })
        .collect())
}

/// Designs an even-order Butterworth filter. A bandpass is a highpass at the
/// low edge followed by a lowpass at the high edge, each of `order`.
pub fn design_butterworth(
    order: usize,
    cutoff: Cutoff,
    sr_hz: f64,
    kind: FilterKind,
) -> Result<BiquadCascade> {
    if !matches!(order, 2 | 4 | 6 | 8) {
        return Err(Error::UnsupportedOrder(order));
    }
    let secs = match (kind, cutoff) {
        (FilterKind::Lowpass, Cutoff::Single(fc)) => sections(order, fc, sr_hz, false)?,
        (FilterKind::Highpass, Cutoff::Single(fc)) => sections(order, fc, sr_hz, true)?,
        (FilterKind::Bandpass, Cutoff::Band(lo, hi)) => {
            if lo >= hi {
                return Err(Error::InvalidCutoff { cutoff_hz: lo, sr_hz });
            }
            let mut s = sections(order, lo, sr_hz, true)?;
            s.extend(sections(order, hi, sr_hz, false)?);
            s
        }
        (kind, cutoff) => {
            return Err(Error::Unsupported(format!("{kind} with cutoff {cutoff:?}")))
        }
    };
    Ok(BiquadCascade {
        sections: secs,
        order,
        kind,
        cutoff,
        sample_rate: sr_hz,
    })
}

/// Zero-initial-state direct-form-II-transposed filtering.
pub fn filter_apply<T: Scalar>(c: &BiquadCascade, x: &[T]) -> Vec<T> {
    let mut y: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
    for s in &c.sections {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in y.iter_mut() {
            let input = *v;
            let out = s.b0 * input + z1;
            z1 = s.b1 * input - s.a1 * out + z2;
            z2 = s.b2 * input - s.a2 * out;
            *v = out;
        }
    }
    y.into_iter().map(T::of).collect()
}
