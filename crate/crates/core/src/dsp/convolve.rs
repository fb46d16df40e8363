use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Linear convolution `x * r`, truncated to `len(x)` so the output stays
/// sample-aligned with `x`.
pub fn convolve_full<T: Scalar>(x: &[T], r: &[T]) -> Result<Vec<T>> {
    if x.is_empty() || r.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = x.len();
    let mut y = vec![T::zero(); n];
    for (k, &rk) in r.iter().enumerate().take(n) {
        if rk == T::zero() {
            continue;
        }
        for (yv, &xv) in y[k..].iter_mut().zip(x) {
            *yv += rk * xv;
        }
    }
    Ok(y)
}
