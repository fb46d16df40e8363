//! Encoder, the two decoders, the fusion block and the full restoration pass.

use crate::audio::{std_dev, AudioBuffer};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::model::config::{ModelConfig, Variant};
use crate::model::params::{BoundParams, ModelParams};
use crate::nn::{ConvGeometry, LstmLayer};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Added to the input standard deviation before normalising.
pub const STD_FLOOR: f64 = 1e-5;

const POINTWISE: ConvGeometry = ConvGeometry::new(1, 0, 1);
const FUSION_GEOM: ConvGeometry = ConvGeometry::new(1, 1, 1);
const FUSION_SLOPE: f64 = 0.01;

/// Node handles of one forward pass. Signals are `[1, L]`; `x_hat` is `[L]`.
#[derive(Clone, Debug)]
pub struct TapeTrace {
    pub y_up: Var,
    pub mask: Option<Var>,
    pub refined: Option<Var>,
    pub w: Option<Var>,
    pub x_hat_up: Var,
    pub x_hat: Var,
    /// Input standard deviation used for normalisation.
    pub std: f64,
}

/// Materialised intermediate signals of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    pub y_up: Vec<T>,
    pub mask: Option<Vec<T>>,
    pub refined: Option<Vec<T>>,
    pub w: Option<Vec<T>>,
    pub x_hat_up: Vec<T>,
    pub x_hat: Vec<T>,
}

/// Encoder. Returns the bottleneck `[C, T]` and the per-block outputs.
pub fn encode<T: Scalar>(
    tape: &mut Tape<T>,
    p: &BoundParams,
    cfg: &ModelConfig,
    y_up: Var,
) -> Result<(Var, Vec<Var>)> {
    let len = tape.shape(y_up)[1];
    let multiple = cfg.stride.pow(cfg.depth as u32);
    if len == 0 || !len.is_multiple_of(multiple) {
        return Err(Error::InvalidLength { len, multiple });
    }
    let geom = cfg.encoder_geometry();
    let mut x = y_up;
    let mut skips = Vec::with_capacity(cfg.depth);
    for i in 0..cfg.depth {
        let pre = format!("encoder.{i}");
        x = tape.conv1d(x, p.var(&format!("{pre}.conv.weight"))?, Some(p.var(&format!("{pre}.conv.bias"))?), geom)?;
        x = tape.relu(x);
        x = tape.conv1d(
            x,
            p.var(&format!("{pre}.pointwise.weight"))?,
            Some(p.var(&format!("{pre}.pointwise.bias"))?),
            POINTWISE,
        )?;
        x = tape.glu(x)?;
        skips.push(x);
    }
    let seq = tape.transpose(x)?;
    let layers = (0..cfg.lstm_layers)
        .map(|l| {
            Ok(LstmLayer {
                w_ih: p.var(&format!("lstm.{l}.w_ih"))?,
                w_hh: p.var(&format!("lstm.{l}.w_hh"))?,
                bias: p.var(&format!("lstm.{l}.bias"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let h = tape.lstm(seq, &layers)?;
    let h = tape.add(h, seq)?;
    Ok((tape.transpose(h)?, skips))
}

fn decoder_block<T: Scalar>(
    tape: &mut Tape<T>,
    p: &BoundParams,
    cfg: &ModelConfig,
    name: &str,
    i: usize,
    x: Var,
    dilation: usize,
) -> Result<Var> {
    let pre = format!("{name}.{i}");
    let x = tape.conv1d(
        x,
        p.var(&format!("{pre}.pointwise.weight"))?,
        Some(p.var(&format!("{pre}.pointwise.bias"))?),
        POINTWISE,
    )?;
    let x = tape.glu(x)?;
    tape.conv_transpose1d(
        x,
        p.var(&format!("{pre}.tconv.weight"))?,
        Some(p.var(&format!("{pre}.tconv.bias"))?),
        cfg.decoder_geometry(dilation),
    )
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Output {
    Linear,
    Sigmoid,
}

/// Runs `depth` decoder blocks. Block 0 reads `start + sides[0]` (or just
/// `sides[0]` without a start); block `i > 0` reads `prev + sides[i]`.
/// Returns the output and each block's summed input.
#[allow(clippy::too_many_arguments)]
fn decoder<T: Scalar>(
    tape: &mut Tape<T>,
    p: &BoundParams,
    cfg: &ModelConfig,
    name: &str,
    start: Option<Var>,
    sides: &[Var],
    dilations: &[usize],
    output: Output,
) -> Result<(Var, Vec<Var>)> {
    let mut prev = start;
    let mut inputs = Vec::with_capacity(cfg.depth);
    for i in 0..cfg.depth {
        let inp = match prev {
            Some(v) => tape.add(v, sides[i]).map_err(|_| {
                Error::shape("decoder input", tape.shape(v), tape.shape(sides[i]))
            })?,
            None => sides[i],
        };
        inputs.push(inp);
        let out = decoder_block(tape, p, cfg, name, i, inp, dilations[i])?;
        prev = Some(if i + 1 < cfg.depth {
            tape.relu(out)
        } else if output == Output::Sigmoid {
            tape.sigmoid(out)
        } else {
            out
        });
    }
    Ok((prev.expect("depth >= 1"), inputs))
}

fn reversed_skips(skips: &[Var]) -> Vec<Var> {
    skips.iter().rev().copied().collect()
}

/// Suppression decoder: returns the mask and every block's summed input.
pub fn suppression_decode<T: Scalar>(
    tape: &mut Tape<T>,
    p: &BoundParams,
    cfg: &ModelConfig,
    bottleneck: Var,
    skips: &[Var],
) -> Result<(Var, Vec<Var>)> {
    let ones = vec![1; cfg.depth];
    decoder(tape, p, cfg, "suppression", Some(bottleneck), &reversed_skips(skips), &ones, Output::Sigmoid)
}

/// Refinement decoder fed by the suppression decoder's summed block inputs.
pub fn refinement_decode<T: Scalar>(
    tape: &mut Tape<T>,
    p: &BoundParams,
    cfg: &ModelConfig,
    suppression_inputs: &[Var],
) -> Result<Var> {
    let dil = &cfg.refinement_dilations;
    Ok(decoder(tape, p, cfg, "refinement", None, suppression_inputs, dil, Output::Linear)?.0)
}

/// Refinement decoder fed directly by encoder skips.
fn refinement_from_encoder<T: Scalar>(
    tape: &mut Tape<T>,
    p: &BoundParams,
    cfg: &ModelConfig,
    bottleneck: Var,
    skips: &[Var],
) -> Result<Var> {
    let dil = &cfg.refinement_dilations;
    let sides = reversed_skips(skips);
    Ok(decoder(tape, p, cfg, "refinement", Some(bottleneck), &sides, dil, Output::Linear)?.0)
}

/// Convex combination `w * refined + (1 - w) * masked`, written as
/// `masked + w * (refined - masked)`.
pub fn combine<T: Scalar>(tape: &mut Tape<T>, w: Var, refined: Var, masked: Var) -> Result<Var> {
    let d = tape.sub(refined, masked)?;
    let wd = tape.mul(w, d)?;
    tape.add(masked, wd)
}

/// Fusion block: returns `(w, x_hat_up)`.
pub fn fuse<T: Scalar>(tape: &mut Tape<T>, p: &BoundParams, refined: Var, masked: Var) -> Result<(Var, Var)> {
    if tape.shape(refined) != tape.shape(masked) {
        return Err(Error::shape("fuse", tape.shape(refined), tape.shape(masked)));
    }
    let mut x = tape.concat(&[refined, masked], 0)?;
    for j in 0..3 {
        x = tape.conv1d(
            x,
            p.var(&format!("fusion.{j}.weight"))?,
            Some(p.var(&format!("fusion.{j}.bias"))?),
            FUSION_GEOM,
        )?;
        x = if j < 2 {
            tape.leaky_relu(x, FUSION_SLOPE)
        } else {
            tape.sigmoid(x)
        };
    }
    let out = combine(tape, x, refined, masked)?;
    Ok((x, out))
}

/// Builds the whole restoration pass on `tape`. With `bypass_fusion` the
/// full model combines its decoders with a fixed weight of one half and
/// never touches the fusion parameters.
pub fn forward_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    p: &BoundParams,
    cfg: &ModelConfig,
    y: &[T],
    bypass_fusion: bool,
) -> Result<TapeTrace> {
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = y.len();
    let std = std_dev(y);
    let inv = T::of(1.0 / (std + STD_FLOOR));
    let mut padded: Vec<T> = y.iter().map(|&v| v * inv).collect();
    padded.resize(cfg.padded_len(n), T::zero());
    let m = padded.len();
    let x = tape.constant(Tensor::new([1, m], padded)?);
    let y_up = tape.upsample4(x)?;
    let (bottleneck, skips) = encode(tape, p, cfg, y_up)?;

    let (mut mask, mut refined, mut w) = (None, None, None);
    let x_hat_up = match cfg.variant {
        Variant::DemucsBaseline => {
            let ones = vec![1; cfg.depth];
            let sides = reversed_skips(&skips);
            decoder(tape, p, cfg, "decoder", Some(bottleneck), &sides, &ones, Output::Linear)?.0
        }
        Variant::RefinementOnly => {
            let r = refinement_from_encoder(tape, p, cfg, bottleneck, &skips)?;
            refined = Some(r);
            r
        }
        v => {
            let (mk, pre) = suppression_decode(tape, p, cfg, bottleneck, &skips)?;
            mask = Some(mk);
            let masked = tape.mul(y_up, mk)?;
            match v {
                Variant::SuppressionOnly => masked,
                _ => {
                    let r = if v.refinement_reads_suppression() {
                        refinement_decode(tape, p, cfg, &pre)?
                    } else {
                        refinement_from_encoder(tape, p, cfg, bottleneck, &skips)?
                    };
                    refined = Some(r);
                    if v.has_fusion() && !bypass_fusion {
                        let (wv, out) = fuse(tape, p, r, masked)?;
                        w = Some(wv);
                        out
                    } else {
                        let half = tape.constant(Tensor::full(tape.shape(r).to_vec(), T::of(0.5)));
                        w = Some(half);
                        combine(tape, half, r, masked)?
                    }
                }
            }
        }
    };
    let down = tape.downsample4(x_hat_up)?;
    let trimmed = tape.slice(down, 1, 0, n)?;
    let scaled = tape.scale(trimmed, std);
    let x_hat = tape.reshape(scaled, &[n])?;
    Ok(TapeTrace {
        y_up,
        mask,
        refined,
        w,
        x_hat_up,
        x_hat,
        std,
    })
}

/// Inference on one mono buffer.
pub fn forward<T: Scalar>(y: &AudioBuffer<T>, params: &ModelParams<T>, cfg: &ModelConfig) -> Result<ForwardTrace<T>> {
    if y.sample_rate != cfg.sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: cfg.sample_rate,
            got: y.sample_rate,
        });
    }
    let mut tape = Tape::new();
    let p = params.bind(&mut tape, |_| false);
    let t = forward_on_tape(&mut tape, &p, cfg, &y.samples, false)?;
    let get = |v: Var| tape.value(v).data().to_vec();
    Ok(ForwardTrace {
        y_up: get(t.y_up),
        mask: t.mask.map(get),
        refined: t.refined.map(get),
        w: t.w.map(get),
        x_hat_up: get(t.x_hat_up),
        x_hat: get(t.x_hat),
    })
}
