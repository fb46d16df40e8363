use crate::autodiff::{sigmoid, Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

impl<T: Scalar> Tape<T> {
    /// Gated linear unit over the channel axis: `[2C, L] -> [C, L]`,
    /// `a * sigmoid(b)` with `a` the first half and `b` the second.
    pub fn glu(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rank() != 2 {
            return Err(Error::shape("glu", xv.shape(), &[0, 0]));
        }
        let (c2, len) = (xv.dim(0), xv.dim(1));
        if c2 % 2 != 0 {
            return Err(Error::OddChannels(c2));
        }
        let half = c2 / 2 * len;
        let (a, b) = xv.data().split_at(half);
        let y: Vec<T> = a.iter().zip(b).map(|(&a, &b)| a * sigmoid(b)).collect();
        let value = Tensor::new([c2 / 2, len], y)?;
        Ok(self.record(
            value,
            &[x],
            Box::new(move |ctx| {
                let (a, b) = ctx.inputs[0].data().split_at(half);
                let mut gx = Vec::with_capacity(2 * half);
                gx.extend(ctx.grad.data().iter().zip(b).map(|(&g, &b)| g * sigmoid(b)));
                gx.extend(ctx.grad.data().iter().zip(a.iter().zip(b)).map(|(&g, (&a, &b))| {
                    let s = sigmoid(b);
                    g * a * s * (T::one() - s)
                }));
                vec![Some(Tensor::new([c2, len], gx).unwrap())]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{gradcheck, FD_STEP};

    #[test]
    fn gates_first_half_by_second() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::new([2, 2], vec![2.0, -4.0, 0.0, 0.0]).unwrap());
        let y = tape.glu(x).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, -2.0]);
        assert_eq!(tape.value(y).shape(), &[1, 2]);
    }

    #[test]
    fn odd_channels_rejected() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::zeros([3, 4]));
        assert!(matches!(tape.glu(x), Err(Error::OddChannels(3))));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = Tensor::new([4, 3], (0..12).map(|i| (i as f64 * 0.7).sin() * 2.0).collect()).unwrap();
        let r = gradcheck(&[x], FD_STEP, |t, v| {
            let y = t.glu(v[0])?;
            let y = t.mul(y, y)?;
            Ok(t.sum(y))
        })
        .unwrap();
        assert!(r.passes(1e-6), "{r:?}");
    }
}
