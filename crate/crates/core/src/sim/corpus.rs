use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::audio::{read_wav, write_wav, AudioBuffer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim::distort::{apply_distortion, peak_guard};
use crate::sim::manifest::{CorpusManifest, ManifestRecord, NoiseSource};
use crate::sim::noise::synthetic_noise;
use crate::sim::spec::{sample_spec, DistortionSpec, Split, Subset};
use crate::sim::{derive_seed, SAMPLE_RATE};

const NOISE_STREAM: u64 = 3;
const RECORD_STREAM_BASE: u64 = 1 << 32;

pub const MANIFEST_NAME: &str = "manifest.tsv";

#[derive(Clone, Debug)]
pub struct CorpusOptions {
    pub subset: Subset,
    pub split: Split,
    pub seed: u64,
    pub count: usize,
    pub noise: NoiseSource,
}

/// Sorted `.wav` files directly inside `dir`.
pub fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    out.sort();
    Ok(out)
}

fn noise_for(source: &NoiseSource, noise_files: &[PathBuf], spec: &DistortionSpec, len: usize) -> Result<AudioBuffer<f64>> {
    let seed = derive_seed(spec.seed, NOISE_STREAM);
    match source {
        NoiseSource::Synthetic => Ok(AudioBuffer::new(synthetic_noise(len, seed, SAMPLE_RATE), SAMPLE_RATE)),
        NoiseSource::Dir(_) => {
            if noise_files.is_empty() {
                return Err(Error::EmptyInput);
            }
            read_wav(&noise_files[(seed % noise_files.len() as u64) as usize])
        }
    }
}

fn read_clean(path: &Path) -> Result<AudioBuffer<f64>> {
    let clean: AudioBuffer<f64> = read_wav(path)?;
    if clean.sample_rate != SAMPLE_RATE {
        return Err(Error::SampleRateMismatch {
            expected: SAMPLE_RATE,
            got: clean.sample_rate,
        });
    }
    Ok(clean)
}

/// Distorts one clean file and writes the result; returns the peak gain.
fn render(
    manifest: &CorpusManifest,
    noise_files: &[PathBuf],
    clean_path: &Path,
    spec: &DistortionSpec,
    out: &Path,
) -> Result<f64> {
    let clean = read_clean(&manifest.resolve(clean_path))?;
    if spec.snr_db.is_none() && clean.is_empty() {
        return Err(Error::EmptyInput);
    }
    let noise = noise_for(&manifest.noise, noise_files, spec, clean.len())?;
    let mut y = apply_distortion(&clean, spec, &noise)?;
    let gain = peak_guard(&mut y.samples);
    write_wav(out, &y)?;
    Ok(gain)
}

fn noise_files(source: &NoiseSource) -> Result<Vec<PathBuf>> {
    match source {
        NoiseSource::Synthetic => Ok(Vec::new()),
        NoiseSource::Dir(d) => {
            let files = list_wavs(d)?;
            if files.is_empty() {
                return Err(Error::EmptyInput);
            }
            Ok(files)
        }
    }
}

/// Generates `count` distorted utterances into `out_dir` (cycling through
/// `clean_files`) and writes `out_dir/manifest.tsv`. Each record draws its
/// own seed from `opts.seed`, so output never depends on scheduling.
pub fn generate_corpus(clean_files: &[PathBuf], out_dir: &Path, opts: &CorpusOptions) -> Result<CorpusManifest> {
    if clean_files.is_empty() || opts.count == 0 {
        return Err(Error::EmptyInput);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let noise = noise_files(&opts.noise)?;
    let mut manifest = CorpusManifest::new(opts.noise.clone(), out_dir);
    let records: Vec<ManifestRecord> = (0..opts.count)
        .into_par_iter()
        .map(|k| {
            let clean = clean_files[k % clean_files.len()].clone();
            let seed = derive_seed(opts.seed, RECORD_STREAM_BASE + k as u64);
            let spec = sample_spec(opts.subset, opts.split, seed);
            let stem = clean.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let distorted = PathBuf::from(format!("{}_{k:05}_{stem}.wav", opts.subset));
            let gain = render(&manifest, &noise, &clean, &spec, &out_dir.join(&distorted))?;
            Ok(ManifestRecord {
                clean,
                distorted,
                spec,
                gain,
            })
        })
        .collect::<Result<_>>()?;
    manifest.records = records;
    manifest.write(out_dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}

/// Re-renders every record of `manifest` from its recorded parameters into
/// `out_dir`, under the same file names.
pub fn regenerate(manifest: &CorpusManifest, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let noise = noise_files(&manifest.noise)?;
    manifest.records.par_iter().try_for_each(|r| {
        let name = r.distorted.file_name().ok_or_else(|| Error::Config("empty distorted path".into()))?;
        let gain = render(manifest, &noise, &r.clean, &r.spec, &out_dir.join(name))?;
        if gain != r.gain {
            return Err(Error::Config(format!(
                "{}: regenerated gain {gain} differs from recorded {}",
                r.distorted.display(),
                r.gain
            )));
        }
        Ok(())
    })
}

/// Loads `(clean target, distorted input)` for one record. The clean target
/// is scaled by the record's peak-guard gain so the pair stays aligned.
pub fn load_pair<T: Scalar>(manifest: &CorpusManifest, r: &ManifestRecord) -> Result<(AudioBuffer<T>, AudioBuffer<T>)> {
    let clean = read_clean(&manifest.resolve(&r.clean))?;
    let distorted: AudioBuffer<f64> = read_wav(manifest.resolve(&r.distorted))?;
    if distorted.sample_rate != clean.sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: clean.sample_rate,
            got: distorted.sample_rate,
        });
    }
    if distorted.len() != clean.len() {
        return Err(Error::LengthMismatch(clean.len(), distorted.len()));
    }
    let target = AudioBuffer::new(clean.samples.iter().map(|v| T::of(v * r.gain)).collect(), clean.sample_rate);
    Ok((target, distorted.cast()))
}
