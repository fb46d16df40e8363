use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::{Cutoff, FilterKind};
use crate::error::{Error, Result};
use crate::sim::SAMPLE_RATE;

/// Test condition: noisy, noisy+reverberant, band-limited, all three.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subset {
    N,
    R,
    B,
    A,
}

impl Subset {
    pub const ALL: [Subset; 4] = [Subset::N, Subset::R, Subset::B, Subset::A];

    pub fn has_noise(self) -> bool {
        self != Subset::B
    }

    pub fn has_reverb(self) -> bool {
        matches!(self, Subset::R | Subset::A)
    }

    pub fn has_bandlimit(self) -> bool {
        matches!(self, Subset::B | Subset::A)
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subset::N => "N",
            Subset::R => "R",
            Subset::B => "B",
            Subset::A => "A",
        })
    }
}

impl FromStr for Subset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "n" => Ok(Subset::N),
            "R" | "r" => Ok(Subset::R),
            "B" | "b" => Ok(Subset::B),
            "A" | "a" => Ok(Subset::A),
            _ => Err(Error::Config(format!("unknown subset `{s}` (expected N, R, B or A)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split `{s}` (expected train or test)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterFamily {
    Butterworth,
    Bessel,
    Elliptic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RirSpec {
    pub t60: f64,
    pub length: usize,
}

impl RirSpec {
    pub fn from_t60(t60: f64, sample_rate: u32) -> Self {
        Self {
            t60,
            length: ((t60 * sample_rate as f64).round() as usize).max(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bandlimit {
    pub family: FilterFamily,
    pub kind: FilterKind,
    pub order: usize,
    pub cutoff: Cutoff,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistortionSpec {
    pub seed: u64,
    pub subset: Subset,
    pub snr_db: Option<f64>,
    pub rir: Option<RirSpec>,
    pub bandlimit: Option<Bandlimit>,
}

impl DistortionSpec {
    /// The identity distortion.
    pub fn clean(seed: u64, subset: Subset) -> Self {
        Self {
            seed,
            subset,
            snr_db: None,
            rir: None,
            bandlimit: None,
        }
    }

    /// Whether the present fields are exactly those the subset calls for.
    pub fn is_consistent(&self) -> bool {
        self.snr_db.is_some() == self.subset.has_noise()
            && self.rir.is_some() == self.subset.has_reverb()
            && self.bandlimit.is_some() == self.subset.has_bandlimit()
    }
}

const TRAIN_SNR: [f64; 4] = [0.0, 5.0, 10.0, 15.0];
const TEST_SNR: [f64; 4] = [2.5, 7.5, 12.5, 17.5];
const TEST_CUTOFFS: [f64; 4] = [4000.0, 5000.0, 6000.0, 7000.0];
const TRAIN_ORDERS: [usize; 4] = [2, 4, 6, 8];
/// Order of the lowpass used for band-limited test conditions.
pub const TEST_ORDER: usize = 8;
pub const T60_RANGE: (f64, f64) = (0.2, 0.8);
pub const LOWPASS_RANGE: (f64, f64) = (4000.0, 7500.0);
pub const HIGHPASS_RANGE: (f64, f64) = (10.0, 100.0);

/// Draws the distortion parameters of one utterance.
pub fn sample_spec(subset: Subset, split: Split, seed: u64) -> DistortionSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = DistortionSpec::clean(seed, subset);
    if subset.has_noise() {
        let set = if split == Split::Train { &TRAIN_SNR } else { &TEST_SNR };
        spec.snr_db = set.choose(&mut rng).copied();
    }
    if subset.has_reverb() {
        let t60 = rng.random_range(T60_RANGE.0..=T60_RANGE.1);
        spec.rir = Some(RirSpec::from_t60(t60, SAMPLE_RATE));
    }
    if subset.has_bandlimit() {
        spec.bandlimit = Some(match split {
            Split::Test => Bandlimit {
                family: FilterFamily::Butterworth,
                kind: FilterKind::Lowpass,
                order: TEST_ORDER,
                cutoff: Cutoff::Single(*TEST_CUTOFFS.choose(&mut rng).expect("non-empty")),
            },
            Split::Train => {
                let kind = *[FilterKind::Lowpass, FilterKind::Highpass, FilterKind::Bandpass]
                    .choose(&mut rng)
                    .expect("non-empty");
                let order = *TRAIN_ORDERS.choose(&mut rng).expect("non-empty");
                let lp = rng.random_range(LOWPASS_RANGE.0..=LOWPASS_RANGE.1);
                let hp = rng.random_range(HIGHPASS_RANGE.0..=HIGHPASS_RANGE.1);
                let cutoff = match kind {
                    FilterKind::Lowpass => Cutoff::Single(lp),
                    FilterKind::Highpass => Cutoff::Single(hp),
                    FilterKind::Bandpass => Cutoff::Band(hp, lp),
                };
                Bandlimit {
                    family: FilterFamily::Butterworth,
                    kind,
                    order,
                    cutoff,
                }
            }
        });
    }
    spec
}
