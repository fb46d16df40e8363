use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("domain error in {0}")]
    DomainError(&'static str),
    #[error("reduction over an empty tensor or axis")]
    EmptyReduction,
    #[error("invalid axis {axis} for rank {rank}")]
    InvalidAxis { axis: usize, rank: usize },
    #[error("backward root must be a scalar, got shape {0:?}")]
    NotScalarRoot(Vec<usize>),
    #[error("backward root is not connected to any leaf requiring a gradient on this tape")]
    DetachedRoot,

    #[error("FFT length {0} is not a power of two")]
    NonPowerOfTwoLength(usize),
    #[error("signal of length {len} is shorter than the required {min}")]
    TooShort { len: usize, min: usize },
    #[error("invalid cutoff {cutoff_hz} Hz for sample rate {sr_hz} Hz")]
    InvalidCutoff { cutoff_hz: f64, sr_hz: f64 },
    #[error("unsupported filter order {0} (expected 2, 4, 6 or 8)")]
    UnsupportedOrder(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("length {len} is not divisible by {factor}")]
    LengthNotDivisible { len: usize, factor: usize },
    #[error("invalid STFT configuration: {0}")]
    InvalidStftConfig(String),

    #[error("conv input of length {len} too short for receptive span {span}")]
    InputTooShort { len: usize, span: usize },
    #[error("transposed convolution would produce a non-positive output length")]
    NegativeOutputLength,
    #[error("GLU requires an even channel count, got {0}")]
    OddChannels(usize),

    #[error("invalid input length {len}: must be a multiple of {multiple}")]
    InvalidLength { len: usize, multiple: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("sample rate mismatch: expected {expected} Hz, got {got} Hz")]
    SampleRateMismatch { expected: u32, got: u32 },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("missing parameter array {0}")]
    MissingParam(String),

    #[error("reference spectrum has zero norm")]
    ZeroReference,
    #[error("clean signal is silent")]
    SilentClean,
    #[error("noise signal is silent")]
    SilentNoise,
    #[error("reference signal is silent")]
    SilentReference,

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
    #[error("step {step} outside schedule [0, {total}]")]
    StepOutOfRange { step: usize, total: usize },
    #[error("manifest has no usable records")]
    ManifestEmpty,
    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
    #[error("checkpoint format version {found} (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("{path}:{line}: {msg}")]
    Manifest {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::ShapeMismatch {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
