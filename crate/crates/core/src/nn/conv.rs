//! Strided, padded, dilated 1-D convolution and its transpose.
//!
//! Both use the cross-correlation convention (no kernel flip). `conv1d`
//! weights are `[out, in, kernel]`; `conv_transpose1d` weights are
//! `[in, out, kernel]`, so one array serves as a conv and its adjoint.

use rayon::prelude::*;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl ConvGeometry {
    pub const fn new(stride: usize, padding: usize, dilation: usize) -> Self {
        Self {
            stride,
            padding,
            dilation,
        }
    }

    pub fn conv_len(&self, len: usize, kernel: usize) -> Result<usize> {
        let span = self.dilation * (kernel - 1) + 1;
        let padded = len + 2 * self.padding;
        if padded < span {
            return Err(Error::InputTooShort { len: padded, span });
        }
        Ok((padded - span) / self.stride + 1)
    }

    pub fn transpose_len(&self, len: usize, kernel: usize) -> Result<usize> {
        let full = (len.max(1) - 1) * self.stride + self.dilation * (kernel - 1) + 1;
        if len == 0 || full <= 2 * self.padding {
            return Err(Error::NegativeOutputLength);
        }
        Ok(full - 2 * self.padding)
    }
}

/// Static description of one correlation: `y[o, t] = sum_{c,k} w[o, c, k] x[c, t s + k d - p]`.
#[derive(Clone, Copy)]
struct Corr {
    c_out: usize,
    c_in: usize,
    kernel: usize,
    len_in: usize,
    len_out: usize,
    g: ConvGeometry,
}

impl Corr {
    /// Output positions `t` for which tap `k` reads inside the input.
    #[inline]
    fn t_range(&self, k: usize) -> (usize, usize) {
        let off = (k * self.g.dilation) as isize - self.g.padding as isize;
        let s = self.g.stride as isize;
        let lo = if off >= 0 { 0 } else { (-off + s - 1) / s };
        let hi = (self.len_in as isize - 1 - off).div_euclid(s) + 1;
        let hi = hi.clamp(0, self.len_out as isize);
        (lo as usize, (hi.max(lo)) as usize)
    }

    #[inline]
    fn src(&self, t: usize, k: usize) -> usize {
        t * self.g.stride + k * self.g.dilation - self.g.padding
    }

    fn forward<T: Scalar>(&self, x: &[T], w: &[T], y: &mut [T]) {
        y.par_chunks_mut(self.len_out).enumerate().for_each(|(o, row)| {
            for c in 0..self.c_in {
                let xr = &x[c * self.len_in..(c + 1) * self.len_in];
                for k in 0..self.kernel {
                    let wv = w[(o * self.c_in + c) * self.kernel + k];
                    if wv == T::zero() {
                        continue;
                    }
                    let (lo, hi) = self.t_range(k);
                    if self.g.stride == 1 {
                        let base = self.src(lo, k);
                        for (yv, &xv) in row[lo..hi].iter_mut().zip(&xr[base..base + hi - lo]) {
                            *yv += wv * xv;
                        }
                    } else {
                        for t in lo..hi {
                            row[t] += wv * xr[self.src(t, k)];
                        }
                    }
                }
            }
        });
    }

    /// `gx[c, t s + k d - p] += sum_o w[o, c, k] g[o, t]`.
    fn adjoint_x<T: Scalar>(&self, g: &[T], w: &[T], gx: &mut [T]) {
        gx.par_chunks_mut(self.len_in).enumerate().for_each(|(c, row)| {
            for o in 0..self.c_out {
                let gr = &g[o * self.len_out..(o + 1) * self.len_out];
                for k in 0..self.kernel {
                    let wv = w[(o * self.c_in + c) * self.kernel + k];
                    if wv == T::zero() {
                        continue;
                    }
                    let (lo, hi) = self.t_range(k);
                    if self.g.stride == 1 {
                        let base = self.src(lo, k);
                        for (xv, &gv) in row[base..base + hi - lo].iter_mut().zip(&gr[lo..hi]) {
                            *xv += wv * gv;
                        }
                    } else {
                        for t in lo..hi {
                            row[self.src(t, k)] += wv * gr[t];
                        }
                    }
                }
            }
        });
    }

    /// `gw[o, c, k] = sum_t g[o, t] x[c, t s + k d - p]`.
    fn grad_w<T: Scalar>(&self, g: &[T], x: &[T]) -> Vec<T> {
        let mut gw = vec![T::zero(); self.c_out * self.c_in * self.kernel];
        gw.par_chunks_mut(self.c_in * self.kernel).enumerate().for_each(|(o, block)| {
            let gr = &g[o * self.len_out..(o + 1) * self.len_out];
            for c in 0..self.c_in {
                let xr = &x[c * self.len_in..(c + 1) * self.len_in];
                for k in 0..self.kernel {
                    let (lo, hi) = self.t_range(k);
                    let mut acc = T::zero();
                    for t in lo..hi {
                        acc += gr[t] * xr[self.src(t, k)];
                    }
                    block[c * self.kernel + k] = acc;
                }
            }
        });
        gw
    }
}

fn row_sums<T: Scalar>(g: &[T], rows: usize, len: usize) -> Vec<T> {
    (0..rows).map(|r| g[r * len..(r + 1) * len].iter().copied().sum()).collect()
}

fn add_bias<T: Scalar>(y: &mut [T], b: &[T], len: usize) {
    for (row, &bv) in y.chunks_mut(len).zip(b) {
        row.iter_mut().for_each(|v| *v += bv);
    }
}

fn check_2d<T: Scalar>(op: &'static str, x: &Tensor<T>, w: &Tensor<T>, cin_axis: usize) -> Result<()> {
    if x.rank() != 2 || w.rank() != 3 || w.dim(cin_axis) != x.dim(0) {
        return Err(Error::shape(op, x.shape(), w.shape()));
    }
    Ok(())
}

impl<T: Scalar> Tape<T> {
    /// `x: [in, L]`, `weight: [out, in, K]`, `bias: [out]` → `[out, L']`.
    pub fn conv1d(&mut self, x: Var, weight: Var, bias: Option<Var>, geom: ConvGeometry) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(weight));
        check_2d("conv1d", xv, wv, 1)?;
        let (c_out, c_in, kernel) = (wv.dim(0), wv.dim(1), wv.dim(2));
        let len_in = xv.dim(1);
        let len_out = geom.conv_len(len_in, kernel)?;
        let corr = Corr { c_out, c_in, kernel, len_in, len_out, g: geom };
        let mut y = vec![T::zero(); c_out * len_out];
        corr.forward(xv.data(), wv.data(), &mut y);
        let mut inputs = vec![x, weight];
        if let Some(b) = bias {
            let bv = self.value(b);
            if bv.shape() != [c_out] {
                return Err(Error::shape("conv1d bias", bv.shape(), &[c_out]));
            }
            add_bias(&mut y, bv.data(), len_out);
            inputs.push(b);
        }
        let value = Tensor::new([c_out, len_out], y)?;
        Ok(self.record(
            value,
            &inputs,
            Box::new(move |ctx| {
                let (x, w, g) = (ctx.inputs[0], ctx.inputs[1], ctx.grad.data());
                let gx = ctx.needs[0].then(|| {
                    let mut gx = vec![T::zero(); c_in * len_in];
                    corr.adjoint_x(g, w.data(), &mut gx);
                    Tensor::new([c_in, len_in], gx).unwrap()
                });
                let gw = ctx.needs[1]
                    .then(|| Tensor::new([c_out, c_in, kernel], corr.grad_w(g, x.data())).unwrap());
                let mut out = vec![gx, gw];
                if ctx.inputs.len() == 3 {
                    out.push(ctx.needs[2].then(|| Tensor::from_vec(row_sums(g, c_out, len_out))));
                }
                out
            }),
        ))
    }

    /// `x: [in, L]`, `weight: [in, out, K]`, `bias: [out]` → `[out, L']`
    /// with `L' = (L-1) s - 2 p + d (K-1) + 1`.
    pub fn conv_transpose1d(
        &mut self,
        x: Var,
        weight: Var,
        bias: Option<Var>,
        geom: ConvGeometry,
    ) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(weight));
        check_2d("conv_transpose1d", xv, wv, 0)?;
        let (c_in, c_out, kernel) = (wv.dim(0), wv.dim(1), wv.dim(2));
        let len_in = xv.dim(1);
        let len_out = geom.transpose_len(len_in, kernel)?;
        // The transposed conv is the adjoint of a conv from `out` to `in`
        // channels sharing this weight array.
        let corr = Corr {
            c_out: c_in,
            c_in: c_out,
            kernel,
            len_in: len_out,
            len_out: len_in,
            g: geom,
        };
        let mut y = vec![T::zero(); c_out * len_out];
        corr.adjoint_x(xv.data(), wv.data(), &mut y);
        let mut inputs = vec![x, weight];
        if let Some(b) = bias {
            let bv = self.value(b);
            if bv.shape() != [c_out] {
                return Err(Error::shape("conv_transpose1d bias", bv.shape(), &[c_out]));
            }
            add_bias(&mut y, bv.data(), len_out);
            inputs.push(b);
        }
        let value = Tensor::new([c_out, len_out], y)?;
        Ok(self.record(
            value,
            &inputs,
            Box::new(move |ctx| {
                let (x, w, g) = (ctx.inputs[0], ctx.inputs[1], ctx.grad.data());
                let gx = ctx.needs[0].then(|| {
                    let mut gx = vec![T::zero(); c_in * len_in];
                    corr.forward(g, w.data(), &mut gx);
                    Tensor::new([c_in, len_in], gx).unwrap()
                });
                let gw = ctx.needs[1]
                    .then(|| Tensor::new([c_in, c_out, kernel], corr.grad_w(x.data(), g)).unwrap());
                let mut out = vec![gx, gw];
                if ctx.inputs.len() == 3 {
                    out.push(ctx.needs[2].then(|| Tensor::from_vec(row_sums(g, c_out, len_out))));
                }
                out
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{gradcheck, FD_STEP};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_t(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn output_length_formulas() {
        assert_eq!(ConvGeometry::new(4, 0, 1).conv_len(16, 8).unwrap(), 3);
        assert_eq!(ConvGeometry::new(4, 2, 1).transpose_len(3, 8).unwrap(), 12);
        assert_eq!(ConvGeometry::new(4, 9, 3).transpose_len(3, 8).unwrap(), 12);
        for d in [1, 3, 5, 7, 9] {
            let g = ConvGeometry::new(4, (7 * d - 3) / 2, d);
            for l in [1, 2, 5, 17] {
                assert_eq!(g.transpose_len(l, 8).unwrap(), 4 * l);
            }
        }
        assert!(matches!(
            ConvGeometry::new(1, 0, 1).conv_len(4, 8),
            Err(Error::InputTooShort { .. })
        ));
        assert!(matches!(
            ConvGeometry::new(1, 10, 1).transpose_len(2, 3),
            Err(Error::NegativeOutputLength)
        ));
    }

    #[test]
    fn box_kernel_sums_windows() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::ones([1, 16]));
        let w = tape.constant(Tensor::ones([1, 1, 8]));
        let b = tape.constant(Tensor::zeros([1]));
        let y = tape.conv1d(x, w, Some(b), ConvGeometry::new(4, 0, 1)).unwrap();
        assert_eq!(tape.value(y).data(), &[8.0, 8.0, 8.0]);
    }

    #[test]
    fn transpose_is_adjoint_of_conv() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(k, s, d, p, l) in &[
            (8, 4, 1, 2, 64),
            (8, 4, 3, 9, 64),
            (8, 4, 9, 30, 256),
            (1, 1, 1, 0, 10),
            (3, 1, 1, 1, 20),
            (8, 4, 1, 0, 40),
            (5, 2, 2, 3, 33),
        ] {
            let g = ConvGeometry::new(s, p, d);
            let x = rand_t(&[3, l], &mut rng);
            let w = rand_t(&[2, 3, k], &mut rng);
            let lo = g.conv_len(l, k).unwrap();
            let y = rand_t(&[2, lo], &mut rng);
            let mut tape = Tape::<f64>::new();
            let (xv, wv, yv) = (tape.constant(x.clone()), tape.constant(w), tape.constant(y.clone()));
            let cx = tape.conv1d(xv, wv, None, g).unwrap();
            let ty = tape.conv_transpose1d(yv, wv, None, g).unwrap();
            let lhs: f64 = tape.value(cx).data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
            let tyv = tape.value(ty);
            // The transpose may be shorter than x when stride does not divide
            // evenly; the trailing samples of x are never read by the conv.
            let rhs: f64 = (0..3)
                .map(|c| {
                    (0..tyv.dim(1)).map(|t| x.data()[c * l + t] * tyv.data()[c * tyv.dim(1) + t]).sum::<f64>()
                })
                .sum();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{k} {s} {d} {p}: {lhs} {rhs}");
        }
    }

    #[test]
    fn conv1d_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inputs = vec![rand_t(&[2, 21], &mut rng), rand_t(&[3, 2, 4], &mut rng), rand_t(&[3], &mut rng)];
        let r = gradcheck(&inputs, FD_STEP, |t, v| {
            let y = t.conv1d(v[0], v[1], Some(v[2]), ConvGeometry::new(2, 1, 2))?;
            let y2 = t.mul(y, y)?;
            Ok(t.sum(y2))
        })
        .unwrap();
        assert!(r.passes(1e-4), "{r:?}");
    }

    #[test]
    fn conv_transpose1d_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inputs = vec![rand_t(&[2, 6], &mut rng), rand_t(&[2, 3, 8], &mut rng), rand_t(&[3], &mut rng)];
        let r = gradcheck(&inputs, FD_STEP, |t, v| {
            let y = t.conv_transpose1d(v[0], v[1], Some(v[2]), ConvGeometry::new(4, 9, 3))?;
            let y2 = t.mul(y, y)?;
            Ok(t.sum(y2))
        })
        .unwrap();
        assert!(r.passes(1e-4), "{r:?}");
    }
}
