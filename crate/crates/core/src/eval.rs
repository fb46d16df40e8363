//! SI-SDR, multi-resolution spectral distance and per-subset reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::model::{forward, ModelConfig, ModelParams};
use crate::objective::loss_freq_value;
use crate::scalar::Scalar;
use crate::sim::{load_pair, CorpusManifest, Subset};

/// Magnitude cap for degenerate SI-SDR values.
pub const SI_SDR_CAP: f64 = 100.0;

/// Scale-invariant signal-to-distortion ratio in dB, clamped to
/// `[-SI_SDR_CAP, SI_SDR_CAP]`.
pub fn si_sdr<T: Scalar>(reference: &[T], estimate: &[T]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::LengthMismatch(reference.len(), estimate.len()));
    }
    let r: Vec<f64> = reference.iter().map(|v| v.as_f64()).collect();
    let e: Vec<f64> = estimate.iter().map(|v| v.as_f64()).collect();
    let rr: f64 = r.iter().map(|v| v * v).sum();
    if rr == 0.0 {
        return Err(Error::SilentReference);
    }
    let alpha = e.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / rr;
    let target_e = alpha * alpha * rr;
    let resid_e: f64 = e.iter().zip(&r).map(|(a, b)| (a - alpha * b).powi(2)).sum();
    if resid_e <= 1e-12 * target_e {
        return Ok(SI_SDR_CAP);
    }
    Ok((10.0 * (target_e / resid_e).log10()).clamp(-SI_SDR_CAP, SI_SDR_CAP))
}

/// Multi-resolution STFT distance (the training frequency loss).
pub fn mr_spectral_distance<T: Scalar>(reference: &[T], estimate: &[T]) -> Result<f64> {
    loss_freq_value(reference, estimate)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub path: PathBuf,
    pub subset: Subset,
    pub si_sdr_in: f64,
    pub si_sdr_out: f64,
    pub si_sdr_impr: f64,
    pub mrsd_in: f64,
    pub mrsd_out: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SubsetMean {
    pub count: usize,
    pub si_sdr_in: f64,
    pub si_sdr_out: f64,
    pub si_sdr_impr: f64,
    pub mrsd_in: f64,
    pub mrsd_out: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

pub const REPORT_HEADER: &str = "path\tsubset\tsi_sdr_in\tsi_sdr_out\tsi_sdr_impr\tmrsd_in\tmrsd_out";

impl EvalReport {
    /// Arithmetic means per subset.
    pub fn means(&self) -> BTreeMap<Subset, SubsetMean> {
        let mut sums: BTreeMap<Subset, SubsetMean> = BTreeMap::new();
        for r in &self.rows {
            let m = sums.entry(r.subset).or_default();
            m.count += 1;
            m.si_sdr_in += r.si_sdr_in;
            m.si_sdr_out += r.si_sdr_out;
            m.si_sdr_impr += r.si_sdr_impr;
            m.mrsd_in += r.mrsd_in;
            m.mrsd_out += r.mrsd_out;
        }
        for m in sums.values_mut() {
            let n = m.count as f64;
            m.si_sdr_in /= n;
            m.si_sdr_out /= n;
            m.si_sdr_impr /= n;
            m.mrsd_in /= n;
            m.mrsd_out /= n;
        }
        sums
    }

    pub fn summary_lines(&self) -> Vec<String> {
        self.means()
            .iter()
            .map(|(s, m)| {
                format!(
                    "subset {s}: n={} si_sdr_in={:.3} si_sdr_out={:.3} si_sdr_impr={:.3} mrsd_in={:.4} mrsd_out={:.4}",
                    m.count, m.si_sdr_in, m.si_sdr_out, m.si_sdr_impr, m.mrsd_in, m.mrsd_out
                )
            })
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{REPORT_HEADER}");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.path.display(),
                r.subset,
                r.si_sdr_in,
                r.si_sdr_out,
                r.si_sdr_impr,
                r.mrsd_in,
                r.mrsd_out
            );
        }
        for line in self.summary_lines() {
            let _ = writeln!(s, "# {line}");
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// Scores one (clean, distorted, restored) triple.
pub fn score<T: Scalar>(path: PathBuf, subset: Subset, clean: &[T], distorted: &[T], restored: &[T]) -> Result<EvalRow> {
    let si_in = si_sdr(clean, distorted)?;
    let si_out = si_sdr(clean, restored)?;
    Ok(EvalRow {
        path,
        subset,
        si_sdr_in: si_in,
        si_sdr_out: si_out,
        si_sdr_impr: si_out - si_in,
        mrsd_in: mr_spectral_distance(clean, distorted)?,
        mrsd_out: mr_spectral_distance(clean, restored)?,
    })
}

/// Restores every selected record and scores input and output against the
/// clean target.
pub fn evaluate<T: Scalar>(
    manifest: &CorpusManifest,
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    subset: Option<Subset>,
) -> Result<EvalReport> {
    let records = manifest.filter(subset);
    if records.is_empty() {
        return Err(Error::ManifestEmpty);
    }
    let rows = records
        .par_iter()
        .map(|r| {
            let (clean, distorted): (AudioBuffer<T>, AudioBuffer<T>) = load_pair(manifest, r)?;
            let out = forward(&distorted, params, cfg)?;
            score(r.distorted.clone(), r.spec.subset, &clean.samples, &distorted.samples, &out.x_hat)
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_examples() {
        assert_eq!(si_sdr(&[1.0f64, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        let r = [0.3f64, -0.2, 0.9, 0.1];
        assert_eq!(si_sdr(&r, &r).unwrap(), SI_SDR_CAP);
        let twice: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
        assert_eq!(si_sdr(&r, &twice).unwrap(), SI_SDR_CAP);
        assert!(matches!(si_sdr(&[0.0f64; 3], &[1.0; 3]), Err(Error::SilentReference)));
        assert!(matches!(si_sdr(&[1.0f64; 3], &[1.0; 2]), Err(Error::LengthMismatch(3, 2))));
    }

    #[test]
    fn means_recompute_from_rows() {
        let row = |s, v: f64| EvalRow {
            path: "x".into(),
            subset: s,
            si_sdr_in: v,
            si_sdr_out: 2.0 * v,
            si_sdr_impr: v,
            mrsd_in: 1.0,
            mrsd_out: 0.5 * v,
        };
        let rep = EvalReport {
            rows: vec![row(Subset::N, 1.0), row(Subset::N, 3.0), row(Subset::A, 5.0)],
        };
        let m = rep.means();
        assert_eq!(m[&Subset::N].count, 2);
        assert_eq!(m[&Subset::N].si_sdr_out, 4.0);
        assert_eq!(m[&Subset::A].mrsd_out, 2.5);
        let tsv = rep.to_tsv();
        assert!(tsv.starts_with(REPORT_HEADER));
        assert_eq!(tsv.lines().filter(|l| !l.starts_with('#')).count(), 4);
    }
}
