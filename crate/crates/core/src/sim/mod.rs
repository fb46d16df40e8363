//! Distortion simulation `y = h(x * r) + n` and corpus generation.

mod corpus;
mod distort;
mod manifest;
mod noise;
mod rir;
mod spec;

pub use corpus::{generate_corpus, list_wavs, load_pair, regenerate, CorpusOptions, MANIFEST_NAME};
pub use distort::{apply_distortion, mix_at_snr, peak_guard, PEAK_LIMIT};
pub use manifest::{CorpusManifest, ManifestRecord, NoiseSource};
pub use noise::synthetic_noise;
pub use rir::{rir_envelope, synth_rir};
pub use spec::{sample_spec, Bandlimit, DistortionSpec, FilterFamily, RirSpec, Split, Subset};

/// Canonical corpus sample rate.
pub const SAMPLE_RATE: u32 = 16_000;

/// Derives an independent seed for stream `stream` of `seed`.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    use rand::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}
