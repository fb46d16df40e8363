//! Fixed ×4 windowed-sinc interpolation and decimation.
//!
//! The kernel is a Hann-windowed sinc with its zero crossings every
//! `RESAMPLE_FACTOR` samples, truncated at 16 crossings per side. Each of the
//! four polyphase branches is scaled to sum to one, so constants pass through
//! both directions unchanged.

use std::sync::OnceLock;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const RESAMPLE_FACTOR: usize = 4;
const ZERO_CROSSINGS: usize = 16;
const HALF: usize = ZERO_CROSSINGS * RESAMPLE_FACTOR;

/// Interpolation taps `h[j]` for `j` in `-HALF..=HALF`, stored at `j + HALF`.
fn kernel_f64() -> &'static [f64] {
    static KERNEL: OnceLock<Vec<f64>> = OnceLock::new();
    KERNEL.get_or_init(|| {
        let f = RESAMPLE_FACTOR as f64;
        let mut h: Vec<f64> = (0..=2 * HALF)
            .map(|i| {
                let j = i as f64 - HALF as f64;
                let t = std::f64::consts::PI * j / f;
                let sinc = if j == 0.0 { 1.0 } else { t.sin() / t };
                let w = 0.5 + 0.5 * (std::f64::consts::PI * j / (HALF as f64 + 1.0)).cos();
                sinc * w
            })
            .collect();
        for phase in 0..RESAMPLE_FACTOR {
            let idx: Vec<usize> = (0..h.len()).filter(|i| i % RESAMPLE_FACTOR == phase).collect();
            let s: f64 = idx.iter().map(|&i| h[i]).sum();
            for i in idx {
                h[i] /= s;
            }
        }
        h
    })
}

fn kernel<T: Scalar>() -> Vec<T> {
    kernel_f64().iter().map(|&v| T::of(v)).collect()
}

/// `y[m] = sum_i x[i] h[m - 4 i]`, output length `4 len(x)`.
fn up_row<T: Scalar>(x: &[T], h: &[T], y: &mut [T]) {
    let n_out = y.len() as isize;
    for (i, &v) in x.iter().enumerate() {
        if v == T::zero() {
            continue;
        }
        let centre = (i * RESAMPLE_FACTOR) as isize;
        let lo = (centre - HALF as isize).max(0);
        let hi = (centre + HALF as isize).min(n_out - 1);
        for m in lo..=hi {
            y[m as usize] += v * h[(m - centre + HALF as isize) as usize];
        }
    }
}

/// Adjoint of [`up_row`].
fn up_row_adjoint<T: Scalar>(g: &[T], h: &[T], gx: &mut [T]) {
    let n_out = g.len() as isize;
    for (i, out) in gx.iter_mut().enumerate() {
        let centre = (i * RESAMPLE_FACTOR) as isize;
        let lo = (centre - HALF as isize).max(0);
        let hi = (centre + HALF as isize).min(n_out - 1);
        let mut acc = T::zero();
        for m in lo..=hi {
            acc += g[m as usize] * h[(m - centre + HALF as isize) as usize];
        }
        *out = acc;
    }
}

/// `y[i] = sum_j x[4 i + j] h[j] / 4`, output length `len(x) / 4`.
fn down_row<T: Scalar>(x: &[T], h: &[T], y: &mut [T]) {
    let n = x.len() as isize;
    let quarter = T::one() / T::of(RESAMPLE_FACTOR as f64);
    for (i, out) in y.iter_mut().enumerate() {
        let centre = (i * RESAMPLE_FACTOR) as isize;
        let lo = (centre - HALF as isize).max(0);
        let hi = (centre + HALF as isize).min(n - 1);
        let mut acc = T::zero();
        for m in lo..=hi {
            acc += x[m as usize] * h[(m - centre + HALF as isize) as usize];
        }
        *out = acc * quarter;
    }
}

/// Adjoint of [`down_row`].
fn down_row_adjoint<T: Scalar>(g: &[T], h: &[T], gx: &mut [T]) {
    let n = gx.len() as isize;
    let quarter = T::one() / T::of(RESAMPLE_FACTOR as f64);
    for (i, &gi) in g.iter().enumerate() {
        let centre = (i * RESAMPLE_FACTOR) as isize;
        let lo = (centre - HALF as isize).max(0);
        let hi = (centre + HALF as isize).min(n - 1);
        let gi = gi * quarter;
        for m in lo..=hi {
            gx[m as usize] += gi * h[(m - centre + HALF as isize) as usize];
        }
    }
}

pub fn upsample4<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); x.len() * RESAMPLE_FACTOR];
    up_row(x, &kernel::<T>(), &mut y);
    y
}

pub fn downsample4<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    if !x.len().is_multiple_of(RESAMPLE_FACTOR) {
        return Err(Error::LengthNotDivisible {
            len: x.len(),
            factor: RESAMPLE_FACTOR,
        });
    }
    let mut y = vec![T::zero(); x.len() / RESAMPLE_FACTOR];
    down_row(x, &kernel::<T>(), &mut y);
    Ok(y)
}

/// Splits a tensor into rows along its last axis.
fn rows(shape: &[usize]) -> (usize, usize) {
    let len = *shape.last().unwrap_or(&0);
    let r = shape.iter().product::<usize>().checked_div(len).unwrap_or(0);
    (r, len)
}

impl<T: Scalar> Tape<T> {
    /// ×4 interpolation along the last axis.
    pub fn upsample4(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let (r, len) = rows(xv.shape());
        let h = kernel::<T>();
        let mut out = vec![T::zero(); r * len * RESAMPLE_FACTOR];
        for i in 0..r {
            up_row(
                &xv.data()[i * len..(i + 1) * len],
                &h,
                &mut out[i * len * RESAMPLE_FACTOR..(i + 1) * len * RESAMPLE_FACTOR],
            );
        }
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() *= RESAMPLE_FACTOR;
        let value = Tensor::new(shape, out)?;
        Ok(self.record(
            value,
            &[x],
            Box::new(move |ctx| {
                let h = kernel::<T>();
                let g = ctx.grad.data();
                let mut gx = vec![T::zero(); r * len];
                for i in 0..r {
                    up_row_adjoint(
                        &g[i * len * RESAMPLE_FACTOR..(i + 1) * len * RESAMPLE_FACTOR],
                        &h,
                        &mut gx[i * len..(i + 1) * len],
                    );
                }
                vec![Some(Tensor::new(ctx.inputs[0].shape().to_vec(), gx).unwrap())]
            }),
        ))
    }

    /// ×4 decimation along the last axis, which must be divisible by 4.
    pub fn downsample4(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let (r, len) = rows(xv.shape());
        if len % RESAMPLE_FACTOR != 0 {
            return Err(Error::LengthNotDivisible {
                len,
                factor: RESAMPLE_FACTOR,
            });
        }
        let out_len = len / RESAMPLE_FACTOR;
        let h = kernel::<T>();
        let mut out = vec![T::zero(); r * out_len];
        for i in 0..r {
            down_row(
                &xv.data()[i * len..(i + 1) * len],
                &h,
                &mut out[i * out_len..(i + 1) * out_len],
            );
        }
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = out_len;
        let value = Tensor::new(shape, out)?;
        Ok(self.record(
            value,
            &[x],
            Box::new(move |ctx| {
                let h = kernel::<T>();
                let g = ctx.grad.data();
                let mut gx = vec![T::zero(); r * len];
                for i in 0..r {
                    down_row_adjoint(
                        &g[i * out_len..(i + 1) * out_len],
                        &h,
                        &mut gx[i * len..(i + 1) * len],
                    );
                }
                vec![Some(Tensor::new(ctx.inputs[0].shape().to_vec(), gx).unwrap())]
            }),
        ))
    }
}
