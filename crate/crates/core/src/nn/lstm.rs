//! Unidirectional LSTM with backpropagation through time.
//!
//! Gate order within the `4H` axis is input, forget, cell, output.

use crate::autodiff::{matmul_raw, sigmoid, Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Weights of one layer, already bound to a tape.
#[derive(Clone, Copy, Debug)]
pub struct LstmLayer {
    /// `[4H, in]`
    pub w_ih: Var,
    /// `[4H, H]`
    pub w_hh: Var,
    /// `[4H]`
    pub bias: Var,
}

fn transpose<T: Scalar>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); a.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

impl<T: Scalar> Tape<T> {
    /// Runs one layer over a time-major sequence `[T, in] -> [T, H]` from a
    /// zero initial state.
    pub fn lstm_layer(&mut self, x: Var, layer: LstmLayer) -> Result<Var> {
        let (xv, wih, whh, bv) = (
            self.value(x),
            self.value(layer.w_ih),
            self.value(layer.w_hh),
            self.value(layer.bias),
        );
        if xv.rank() != 2 || wih.rank() != 2 || wih.dim(1) != xv.dim(1) {
            return Err(Error::shape("lstm input", xv.shape(), wih.shape()));
        }
        let (steps, n_in) = (xv.dim(0), xv.dim(1));
        let g4 = wih.dim(0);
        let h = g4 / 4;
        if g4 % 4 != 0 || whh.shape() != [g4, h] || bv.shape() != [g4] {
            return Err(Error::shape("lstm weights", whh.shape(), &[g4, h]));
        }
        if steps == 0 {
            return Err(Error::EmptyInput);
        }
        // Input projections for all steps at once: [T, 4H].
        let wih_t = transpose(wih.data(), g4, n_in);
        let mut z_in = matmul_raw(xv.data(), &wih_t, steps, n_in, g4);
        for row in z_in.chunks_mut(g4) {
            row.iter_mut().zip(bv.data()).for_each(|(z, &b)| *z += b);
        }
        let whh_d = whh.data();
        // gates: activated i, f, g, o per step; cells and hidden states.
        let mut gates = vec![T::zero(); steps * g4];
        let mut cells = vec![T::zero(); steps * h];
        let mut hidden = vec![T::zero(); steps * h];
        let mut h_prev = vec![T::zero(); h];
        let mut c_prev = vec![T::zero(); h];
        for t in 0..steps {
            let z = &mut z_in[t * g4..(t + 1) * g4];
            for (r, zr) in z.iter_mut().enumerate() {
                let w = &whh_d[r * h..(r + 1) * h];
                *zr += w.iter().zip(&h_prev).map(|(&a, &b)| a * b).sum::<T>();
            }
            let gt = &mut gates[t * g4..(t + 1) * g4];
            for j in 0..h {
                let i = sigmoid(z[j]);
                let f = sigmoid(z[h + j]);
                let g = z[2 * h + j].tanh();
                let o = sigmoid(z[3 * h + j]);
                let c = f * c_prev[j] + i * g;
                let hv = o * c.tanh();
                gt[j] = i;
                gt[h + j] = f;
                gt[2 * h + j] = g;
                gt[3 * h + j] = o;
                cells[t * h + j] = c;
                hidden[t * h + j] = hv;
                c_prev[j] = c;
                h_prev[j] = hv;
            }
        }
        let value = Tensor::new([steps, h], hidden.clone())?;
        Ok(self.record(
            value,
            &[x, layer.w_ih, layer.w_hh, layer.bias],
            Box::new(move |ctx| {
                let (x, w_ih, w_hh) = (ctx.inputs[0].data(), ctx.inputs[1].data(), ctx.inputs[2].data());
                let gout = ctx.grad.data();
                let mut dz_all = vec![T::zero(); steps * g4];
                let mut dw_hh = vec![T::zero(); g4 * h];
                let mut dh_next = vec![T::zero(); h];
                let mut dc_next = vec![T::zero(); h];
                let one = T::one();
                for t in (0..steps).rev() {
                    let gt = &gates[t * g4..(t + 1) * g4];
                    let dz = &mut dz_all[t * g4..(t + 1) * g4];
                    for j in 0..h {
                        let (i, f, g, o) = (gt[j], gt[h + j], gt[2 * h + j], gt[3 * h + j]);
                        let c = cells[t * h + j];
                        let c_before = if t > 0 { cells[(t - 1) * h + j] } else { T::zero() };
                        let tc = c.tanh();
                        let dh = gout[t * h + j] + dh_next[j];
                        let dc = dh * o * (one - tc * tc) + dc_next[j];
                        dz[j] = dc * g * i * (one - i);
                        dz[h + j] = dc * c_before * f * (one - f);
                        dz[2 * h + j] = dc * i * (one - g * g);
                        dz[3 * h + j] = dh * tc * o * (one - o);
                        dc_next[j] = dc * f;
                    }
                    dh_next.iter_mut().for_each(|v| *v = T::zero());
                    for (r, &dzr) in dz.iter().enumerate() {
                        if dzr == T::zero() {
                            continue;
                        }
                        let w = &w_hh[r * h..(r + 1) * h];
                        dh_next.iter_mut().zip(w).for_each(|(d, &wv)| *d += dzr * wv);
                        if t > 0 {
                            let hp = &hidden[(t - 1) * h..t * h];
                            dw_hh[r * h..(r + 1) * h]
                                .iter_mut()
                                .zip(hp)
                                .for_each(|(d, &hv)| *d += dzr * hv);
                        }
                    }
                }
                let gx = ctx.needs[0].then(|| {
                    Tensor::new([steps, n_in], matmul_raw(&dz_all, w_ih, steps, g4, n_in)).unwrap()
                });
                let gw_ih = ctx.needs[1].then(|| {
                    let dz_t = transpose(&dz_all, steps, g4);
                    Tensor::new([g4, n_in], matmul_raw(&dz_t, x, g4, steps, n_in)).unwrap()
                });
                let gw_hh = ctx.needs[2].then(|| Tensor::new([g4, h], dw_hh).unwrap());
                let gb = ctx.needs[3].then(|| {
                    let mut b = vec![T::zero(); g4];
                    for row in dz_all.chunks(g4) {
                        b.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
                    }
                    Tensor::from_vec(b)
                });
                vec![gx, gw_ih, gw_hh, gb]
            }),
        ))
    }

    /// Stacked layers, each feeding the next.
    pub fn lstm(&mut self, x: Var, layers: &[LstmLayer]) -> Result<Var> {
        layers.iter().try_fold(x, |h, &l| self.lstm_layer(h, l))
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
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-0.8..0.8)).collect()).unwrap()
    }

    #[test]
    fn single_step_matches_hand_computation() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::new([1, 1], vec![1.0]).unwrap());
        let w_ih = tape.constant(Tensor::new([4, 1], vec![0.5, 0.0, 1.0, -0.5]).unwrap());
        let w_hh = tape.constant(Tensor::zeros([4, 1]));
        let bias = tape.constant(Tensor::zeros([4]));
        let y = tape.lstm_layer(x, LstmLayer { w_ih, w_hh, bias }).unwrap();
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let c = s(0.5) * 1f64.tanh();
        let expected = s(-0.5) * c.tanh();
        assert!((tape.value(y).item() - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::ones([5, 3]));
        let w_ih = tape.constant(Tensor::zeros([8, 3]));
        let w_hh = tape.constant(Tensor::zeros([8, 2]));
        let bias = tape.constant(Tensor::zeros([8]));
        let y = tape.lstm_layer(x, LstmLayer { w_ih, w_hh, bias }).unwrap();
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_layer_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inputs = vec![
            rand_t(&[6, 3], &mut rng),
            rand_t(&[8, 3], &mut rng),
            rand_t(&[8, 2], &mut rng),
            rand_t(&[8], &mut rng),
            rand_t(&[8, 2], &mut rng),
            rand_t(&[8, 2], &mut rng),
            rand_t(&[8], &mut rng),
        ];
        let r = gradcheck(&inputs, FD_STEP, |t, v| {
            let layers = [
                LstmLayer { w_ih: v[1], w_hh: v[2], bias: v[3] },
                LstmLayer { w_ih: v[4], w_hh: v[5], bias: v[6] },
            ];
            let y = t.lstm(v[0], &layers)?;
            let y = t.mul(y, y)?;
            Ok(t.sum(y))
        })
        .unwrap();
        assert!(r.passes(1e-5), "{r:?}");
    }
}
