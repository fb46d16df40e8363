//! Iterative radix-2 Cooley-Tukey FFT.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Precomputed twiddles and bit-reversal permutation for one transform size.
#[derive(Clone, Debug)]
pub struct FftPlan<T> {
    n: usize,
    twiddles: Vec<Complex<T>>,
    rev: Vec<usize>,
}

impl<T: Scalar> FftPlan<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::NonPowerOfTwoLength(n));
        }
        let bits = n.trailing_zeros();
        let rev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        // Each twiddle is evaluated directly in f64, never by repeated
        // multiplication, so accuracy does not degrade with n.
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex::new(T::of(a.cos()), T::of(a.sin()))
            })
            .collect();
        Ok(Self { n, twiddles, rev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place transform. Forward is unscaled; inverse is scaled by `1/n`.
    pub fn process(&self, buf: &mut [Complex<T>], inverse: bool) -> Result<()> {
        if buf.len() != self.n {
            return Err(Error::LengthMismatch(buf.len(), self.n));
        }
        let n = self.n;
        for i in 0..n {
            let j = self.rev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * step];
                    let w = if inverse { w.conj() } else { w };
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
        if inverse {
            let s = T::one() / T::of(n as f64);
            buf.iter_mut().for_each(|v| *v *= s);
        }
        Ok(())
    }
}

/// One-shot transform of `x`.
pub fn fft<T: Scalar>(x: &[Complex<T>], inverse: bool) -> Result<Vec<Complex<T>>> {
    let plan = FftPlan::new(x.len())?;
    let mut buf = x.to_vec();
    plan.process(&mut buf, inverse)?;
    Ok(buf)
}
