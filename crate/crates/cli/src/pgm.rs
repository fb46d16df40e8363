//! Log-magnitude spectrogram images as binary PGM (P5).

use std::path::Path;

use hdrestore::dsp::{stft_magnitude, StftConfig};
use hdrestore::{Error, Result};

/// Dynamic range mapped onto the 8-bit grey scale.
const RANGE_DB: f64 = 80.0;

/// Renders `[frames, bins]` magnitudes with time on the x axis and
/// frequency rising upward. Row `r` holds bin `bins - 1 - r`.
pub fn render(mag: &[f32], frames: usize, bins: usize) -> Vec<u8> {
    let db: Vec<f64> = mag.iter().map(|&m| 20.0 * (m as f64 + 1e-10).log10()).collect();
    let top = db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n{frames} {bins}\n255\n").into_bytes();
    for r in 0..bins {
        let bin = bins - 1 - r;
        for f in 0..frames {
            let v = ((db[f * bins + bin] - top + RANGE_DB) / RANGE_DB).clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    out
}

pub fn write_spectrogram(path: &Path, x: &[f32]) -> Result<()> {
    let cfg = StftConfig::new(512, 128, 512)?;
    let mag = stft_magnitude(x, cfg)?;
    let (frames, bins) = (mag.dim(0), mag.dim(1));
    std::fs::write(path, render(mag.data(), frames, bins)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
