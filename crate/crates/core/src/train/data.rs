use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim::{load_pair, CorpusManifest};

/// One training pair: clean target and distorted input of equal length.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainItem<T> {
    pub target: Vec<T>,
    pub input: Vec<T>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainData<T> {
    pub items: Vec<TrainItem<T>>,
}

const CROP_SALT: u64 = 0x6372_6f70;

impl<T: Scalar> TrainData<T> {
    pub fn new(items: Vec<TrainItem<T>>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::ManifestEmpty);
        }
        for it in &items {
            if it.target.len() != it.input.len() {
                return Err(Error::LengthMismatch(it.target.len(), it.input.len()));
            }
            if it.target.is_empty() {
                return Err(Error::EmptyInput);
            }
        }
        Ok(Self { items })
    }

    pub fn from_manifest(m: &CorpusManifest) -> Result<Self> {
        let items = m
            .records
            .iter()
            .map(|r| {
                let (x, y) = load_pair::<T>(m, r)?;
                Ok(TrainItem {
                    target: x.samples,
                    input: y.samples,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(items)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `(item, crop offset)` for each batch slot of `step`. Items are visited
    /// in a fresh seeded permutation every epoch and cropped at an offset
    /// seeded per (epoch, item), so the batch is a pure function of
    /// `(seed, step)`.
    pub fn batch_plan(&self, seed: u64, step: usize, batch: usize, segment: usize) -> Vec<(usize, usize)> {
        let n = self.items.len();
        let mut cached: Option<(usize, Vec<usize>)> = None;
        (0..batch)
            .map(|j| {
                let pos = step * batch + j;
                let (epoch, k) = (pos / n, pos % n);
                if cached.as_ref().is_none_or(|(e, _)| *e != epoch) {
                    let mut perm: Vec<usize> = (0..n).collect();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(epoch as u64);
                    perm.shuffle(&mut rng);
                    cached = Some((epoch, perm));
                }
                let item = cached.as_ref().expect("set above").1[k];
                let len = self.items[item].target.len();
                let offset = if len > segment {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ CROP_SALT);
                    rng.set_stream((epoch * n + item) as u64);
                    rng.random_range(0..=len - segment)
                } else {
                    0
                };
                (item, offset)
            })
            .collect()
    }

    /// A `segment`-sample crop, zero-padded when the item is shorter.
    pub fn crop(&self, item: usize, offset: usize, segment: usize) -> TrainItem<T> {
        let it = &self.items[item];
        let take = |v: &[T]| {
            let mut out: Vec<T> = v[offset..(offset + segment).min(v.len())].to_vec();
            out.resize(segment, T::zero());
            out
        };
        TrainItem {
            target: take(&it.target),
            input: take(&it.input),
        }
    }
}
