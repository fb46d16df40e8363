use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dsp::{Cutoff, FilterKind};
use crate::error::{Error, Result};
use crate::sim::spec::{Bandlimit, DistortionSpec, FilterFamily, RirSpec, Subset};
use crate::sim::SAMPLE_RATE;

/// Where additive noise comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NoiseSource {
    /// Seeded coloured noise generated per record.
    Synthetic,
    /// WAV files in a directory, chosen per record by seed.
    Dir(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRecord {
    pub clean: PathBuf,
    pub distorted: PathBuf,
    pub spec: DistortionSpec,
    /// Peak-guard gain applied to the mixture (and to the clean target on load).
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusManifest {
    pub sample_rate: u32,
    pub noise: NoiseSource,
    pub records: Vec<ManifestRecord>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

const COLUMNS: &str = "clean\tdistorted\tsubset\tseed\tsnr_db\tt60\tfilter\tcutoff\tgain";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

impl CorpusManifest {
    pub fn new(noise: NoiseSource, base_dir: impl Into<PathBuf>) -> Self {
        Self {
            sample_rate: SAMPLE_RATE,
            noise,
            records: Vec::new(),
            base_dir: base_dir.into(),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Records of one subset, or all when `subset` is `None`.
    pub fn filter(&self, subset: Option<Subset>) -> Vec<&ManifestRecord> {
        self.records
            .iter()
            .filter(|r| subset.is_none_or(|s| r.spec.subset == s))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "#sample_rate\t{}", self.sample_rate);
        let _ = match &self.noise {
            NoiseSource::Synthetic => writeln!(s, "#noise\tsynthetic"),
            NoiseSource::Dir(d) => writeln!(s, "#noise\tdir:{}", d.display()),
        };
        let _ = writeln!(s, "#{COLUMNS}");
        for r in &self.records {
            let sp = &r.spec;
            let (filter, cutoff) = match sp.bandlimit {
                None => ("-".to_string(), "-".to_string()),
                Some(b) => (
                    format!("{}/{}", b.kind, b.order),
                    match b.cutoff {
                        Cutoff::Single(f) => f.to_string(),
                        Cutoff::Band(lo, hi) => format!("{lo},{hi}"),
                    },
                ),
            };
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.clean.display(),
                r.distorted.display(),
                sp.subset,
                sp.seed,
                opt(sp.snr_db),
                opt(sp.rir.map(|r| r.t60)),
                filter,
                cutoff,
                r.gain
            );
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, path, base)
    }

    pub fn parse(text: &str, path: &Path, base_dir: PathBuf) -> Result<Self> {
        let mut m = CorpusManifest::new(NoiseSource::Synthetic, base_dir);
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let err = |msg: String| Error::Manifest {
                path: path.to_path_buf(),
                line: lineno,
                msg,
            };
            if line.trim().is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let mut kv = meta.splitn(2, '\t');
                match (kv.next(), kv.next()) {
                    (Some("sample_rate"), Some(v)) => {
                        m.sample_rate = v.parse().map_err(|_| err(format!("bad sample rate `{v}`")))?
                    }
                    (Some("noise"), Some("synthetic")) => m.noise = NoiseSource::Synthetic,
                    (Some("noise"), Some(v)) => match v.strip_prefix("dir:") {
                        Some(d) => m.noise = NoiseSource::Dir(PathBuf::from(d)),
                        None => return Err(err(format!("bad noise source `{v}`"))),
                    },
                    _ => {}
                }
                continue;
            }
            m.records.push(parse_record(line, m.sample_rate).map_err(err)?);
        }
        Ok(m)
    }
}

fn parse_record(line: &str, sample_rate: u32) -> std::result::Result<ManifestRecord, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != 9 {
        return Err(format!("expected 9 tab-separated fields, found {}", f.len()));
    }
    let num = |name: &str, v: &str| -> std::result::Result<Option<f64>, String> {
        if v == "-" {
            return Ok(None);
        }
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(Some)
            .ok_or_else(|| format!("bad {name} `{v}`"))
    };
    let subset: Subset = f[2].parse().map_err(|e: Error| e.to_string())?;
    let seed: u64 = f[3].parse().map_err(|_| format!("bad seed `{}`", f[3]))?;
    let snr_db = num("snr_db", f[4])?;
    let rir = num("t60", f[5])?
        .map(|t60| {
            if t60 > 0.0 {
                Ok(RirSpec::from_t60(t60, sample_rate))
            } else {
                Err(format!("t60 must be positive, got {t60}"))
            }
        })
        .transpose()?;
    let bandlimit = match (f[6], f[7]) {
        ("-", "-") => None,
        (filter, cutoff) => {
            let (kind, order) = filter
                .split_once('/')
                .ok_or_else(|| format!("bad filter `{filter}` (expected kind/order)"))?;
            let kind: FilterKind = kind.parse().map_err(|e: Error| e.to_string())?;
            let order: usize = order.parse().map_err(|_| format!("bad filter order `{order}`"))?;
            let cuts: Vec<f64> = cutoff
                .split(',')
                .map(|c| num("cutoff", c)?.ok_or_else(|| "missing cutoff".to_string()))
                .collect::<std::result::Result<_, _>>()?;
            let cutoff = match (kind, cuts.as_slice()) {
                (FilterKind::Bandpass, [lo, hi]) => Cutoff::Band(*lo, *hi),
                (FilterKind::Lowpass | FilterKind::Highpass, [fc]) => Cutoff::Single(*fc),
                _ => return Err(format!("cutoff `{cutoff}` does not fit a {kind}")),
            };
            Some(Bandlimit {
                family: FilterFamily::Butterworth,
                kind,
                order,
                cutoff,
            })
        }
    };
    let gain = num("gain", f[8])?.ok_or("missing gain")?;
    let spec = DistortionSpec {
        seed,
        subset,
        snr_db,
        rir,
        bandlimit,
    };
    if !spec.is_consistent() {
        return Err(format!("fields do not match subset {subset}"));
    }
    Ok(ManifestRecord {
        clean: PathBuf::from(f[0]),
        distorted: PathBuf::from(f[1]),
        spec,
        gain,
    })
}
