//! Self-checks runnable from the command line: finite-difference gradients
//! of the full model, parameter counts against published sizes, and DSP
//! primitives against direct reference computations.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tape;
use crate::dsp::{convolve_full, design_butterworth, downsample4, fft, upsample4, Cutoff, FilterKind};
use crate::error::{Error, Result};
use crate::eval::si_sdr;
use crate::gradcheck::{gradcheck, GradCheckReport, FD_STEP};
use crate::model::{count_params, forward_on_tape, param_specs, BoundParams, ModelConfig, Variant};
use crate::nn::{init_params, ConvGeometry};
use crate::objective::{loss_total, min_len};
use crate::tensor::Tensor;

/// Maximum relative error accepted by the gradient suite.
pub const GRAD_TOL: f64 = 1e-4;
/// Maximum absolute error accepted for FFT and convolution.
pub const DSP_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Gradcheck,
    Params,
    Dsp,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Gradcheck, Suite::Params, Suite::Dsp];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Gradcheck => "gradcheck",
            Suite::Params => "params",
            Suite::Dsp => "dsp",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Unsupported(format!("verify suite {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

pub fn run_suite(suite: Suite) -> Result<Vec<Check>> {
    match suite {
        Suite::Gradcheck => gradcheck_suite(),
        Suite::Params => Ok(params_suite()),
        Suite::Dsp => dsp_suite(),
    }
}

/// A published model size with its relative tolerance.
#[derive(Clone, Debug)]
pub struct SizeTarget {
    pub label: &'static str,
    pub config: ModelConfig,
    pub target: usize,
    pub tolerance: f64,
}

pub fn size_targets() -> Vec<SizeTarget> {
    let base = ModelConfig::default();
    vec![
        SizeTarget {
            label: "DEMUCS48",
            config: base.clone().with_variant(Variant::DemucsBaseline),
            target: 18_000_000,
            tolerance: 0.10,
        },
        SizeTarget {
            label: "DEMUCS64",
            config: ModelConfig { hidden: 64, ..base.clone() }.with_variant(Variant::DemucsBaseline),
            target: 33_000_000,
            tolerance: 0.10,
        },
        SizeTarget {
            label: "HD-DEMUCS",
            config: base.with_variant(Variant::HdDemucs),
            target: 24_000_000,
            tolerance: 0.15,
        },
    ]
}

pub fn params_suite() -> Vec<Check> {
    size_targets()
        .into_iter()
        .map(|t| {
            let n = count_params(&t.config);
            let rel = (n as f64 - t.target as f64) / t.target as f64;
            Check::new(
                t.label,
                rel.abs() <= t.tolerance,
                format!("{n} params, target {} ± {:.0}% ({:+.2}%)", t.target, 100.0 * t.tolerance, 100.0 * rel),
            )
        })
        .collect()
}

/// Seeded broadband signal: every STFT magnitude stays well away from zero,
/// where the magnitude is not differentiable.
fn probe_signal(n: usize, seed: u64, amplitude: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-amplitude..amplitude)).collect()
}

/// Finite-difference check of the training loss with respect to every
/// parameter of `cfg`, in 64-bit precision. Biases are set to small
/// non-zero values so that every path carries signal.
pub fn gradcheck_model(cfg: &ModelConfig, seed: u64, bypass_fusion: bool) -> Result<GradCheckReport> {
    let params = init_params::<f64>(cfg, seed);
    let specs = param_specs(cfg);
    let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
    let mut inputs = Vec::with_capacity(specs.len());
    for (k, s) in specs.iter().enumerate() {
        let t = params.get(&s.name)?;
        inputs.push(if s.fan_in == 0 {
            Tensor::new(s.shape.clone(), (0..t.numel()).map(|i| 0.05 * ((i + k) as f64).sin()).collect())?
        } else {
            t.clone()
        });
    }
    let n = min_len() + 37;
    let target = probe_signal(n, 1, 0.5);
    let y: Vec<f64> = target.iter().zip(probe_signal(n, 2, 0.2)).map(|(x, d)| x + d).collect();
    gradcheck(&inputs, FD_STEP, |tape: &mut Tape<f64>, vars| {
        let p = BoundParams::from_vars(names.iter().cloned().zip(vars.iter().copied()));
        let trace = forward_on_tape(tape, &p, cfg, &y, bypass_fusion)?;
        let x = tape.constant(Tensor::new([n], target.clone())?);
        Ok(loss_total(tape, x, trace.x_hat)?.total)
    })
}

pub fn gradcheck_suite() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for v in Variant::ALL {
        let cfg = ModelConfig::tiny(2, 2, v);
        let r = gradcheck_model(&cfg, 7, false)?;
        out.push(Check::new(
            format!("loss gradient {v} (H=2, depth=2)"),
            r.passes(GRAD_TOL),
            format!("{} entries, max rel. error {:.3e}", r.checked, r.max_rel_error),
        ));
    }
    Ok(out)
}

fn naive_dft(x: &[Complex<f64>], inverse: bool) -> Vec<Complex<f64>> {
    let n = x.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    (0..n)
        .map(|k| {
            let mut acc = Complex::new(0.0, 0.0);
            for (j, &v) in x.iter().enumerate() {
                // Reduce the index product first to keep the angle small.
                let a = sign * 2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
                acc += v * Complex::new(a.cos(), a.sin());
            }
            if inverse {
                acc / n as f64
            } else {
                acc
            }
        })
        .collect()
}

fn naive_conv1d(x: &[f64], cin: usize, len: usize, w: &[f64], cout: usize, k: usize, g: ConvGeometry) -> Vec<f64> {
    let out_len = (len + 2 * g.padding - g.dilation * (k - 1) - 1) / g.stride + 1;
    let mut y = vec![0.0; cout * out_len];
    for o in 0..cout {
        for t in 0..out_len {
            let mut acc = 0.0;
            for c in 0..cin {
                for j in 0..k {
                    let pos = (t * g.stride + j * g.dilation) as isize - g.padding as isize;
                    if pos >= 0 && (pos as usize) < len {
                        acc += w[(o * cin + c) * k + j] * x[c * len + pos as usize];
                    }
                }
            }
            y[o * out_len + t] = acc;
        }
    }
    y
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn dsp_suite() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut out = Vec::new();

    let mut fft_err: f64 = 0.0;
    for n in [8, 64, 512, 1024] {
        let x: Vec<Complex<f64>> = (0..n)
            .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        for inverse in [false, true] {
            let a = fft(&x, inverse)?;
            let b = naive_dft(&x, inverse);
            fft_err = a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(fft_err, f64::max);
        }
    }
    out.push(Check::new("FFT vs direct DFT", fft_err < DSP_TOL, format!("max error {fft_err:.3e}")));

    let x: Vec<f64> = (0..700).map(|_| rng.random_range(-1.0..1.0)).collect();
    let r: Vec<f64> = (0..97).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fast = convolve_full(&x, &r)?;
    let direct: Vec<f64> = (0..x.len())
        .map(|n| (0..=n.min(r.len() - 1)).map(|k| r[k] * x[n - k]).sum())
        .collect();
    let mut conv_err = max_abs_diff(&fast, &direct);
    for (g, k) in [
        (ConvGeometry::new(1, 0, 1), 3),
        (ConvGeometry::new(4, 2, 1), 8),
        (ConvGeometry::new(1, 3, 3), 3),
    ] {
        let (cin, cout, len) = (3, 2, 61);
        let xs: Vec<f64> = (0..cin * len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ws: Vec<f64> = (0..cout * cin * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut tape = Tape::<f64>::new();
        let xv = tape.constant(Tensor::new([cin, len], xs.clone())?);
        let wv = tape.constant(Tensor::new([cout, cin, k], ws.clone())?);
        let yv = tape.conv1d(xv, wv, None, g)?;
        let reference = naive_conv1d(&xs, cin, len, &ws, cout, k, g);
        conv_err = conv_err.max(max_abs_diff(tape.value(yv).data(), &reference));
    }
    out.push(Check::new("convolution vs direct sum", conv_err < DSP_TOL, format!("max error {conv_err:.3e}")));

    let mut worst_db: f64 = 0.0;
    for order in [2, 4, 6, 8] {
        for (kind, fc) in [(FilterKind::Lowpass, 4000.0), (FilterKind::Lowpass, 7000.0), (FilterKind::Highpass, 50.0)] {
            let c = design_butterworth(order, Cutoff::Single(fc), 16_000.0, kind)?;
            let dev = c.magnitude_db(fc) + 3.0103;
            if dev.abs() > worst_db.abs() {
                worst_db = dev;
            }
        }
    }
    out.push(Check::new(
        "Butterworth gain at cutoff",
        worst_db.abs() <= 0.1,
        format!("worst deviation from -3.01 dB: {worst_db:+.4} dB"),
    ));

    let tone: Vec<f64> = (0..16_000)
        .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16_000.0).sin())
        .collect();
    let back = downsample4(&upsample4(&tone))?;
    let snr = si_sdr(&tone, &back)?;
    out.push(Check::new("resampler round trip (1 kHz tone)", snr > 40.0, format!("SI-SDR {snr:.2} dB")));
    Ok(out)
}
