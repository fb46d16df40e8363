//! Training criterion: mean absolute waveform error plus a multi-resolution
//! STFT loss (spectral convergence and log-magnitude distance).

use crate::autodiff::{Reduce, Tape, Var};
use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Added to magnitudes before taking logs.
pub const LOG_FLOOR: f64 = 1e-5;

/// `(fft_bins, hop, window_len)` of each resolution.
pub const RESOLUTIONS: [(usize, usize, usize); 3] = [(512, 50, 240), (1024, 120, 600), (2048, 240, 1200)];

pub fn resolutions() -> [StftConfig; 3] {
    RESOLUTIONS.map(|(n, h, w)| StftConfig::new(n, h, w).expect("constant resolutions are valid"))
}

/// Shortest waveform the frequency loss accepts.
pub fn min_len() -> usize {
    RESOLUTIONS.iter().map(|r| r.2).max().unwrap_or(0)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossReport {
    pub l_time: f64,
    pub l_sc: Vec<f64>,
    /// Per resolution, before division by the sample count.
    pub l_mag: Vec<f64>,
    pub l_freq: f64,
    pub total: f64,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        [self.l_time, self.l_freq, self.total]
            .iter()
            .chain(&self.l_sc)
            .chain(&self.l_mag)
            .all(|v| v.is_finite())
    }
}

/// Scalar node handles plus their values.
#[derive(Clone, Debug)]
pub struct LossNodes {
    pub total: Var,
    pub report: LossReport,
}

fn check_len<T: Scalar>(tape: &Tape<T>, x: Var, x_hat: Var) -> Result<usize> {
    let (a, b) = (tape.value(x).numel(), tape.value(x_hat).numel());
    if a != b {
        return Err(Error::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(a)
}

fn flat<T: Scalar>(tape: &mut Tape<T>, v: Var) -> Result<Var> {
    let n = tape.value(v).numel();
    tape.reshape(v, &[n])
}

/// `mean |x - x_hat|`.
pub fn loss_time<T: Scalar>(tape: &mut Tape<T>, x: Var, x_hat: Var) -> Result<Var> {
    check_len(tape, x, x_hat)?;
    let (x, x_hat) = (flat(tape, x)?, flat(tape, x_hat)?);
    let d = tape.sub(x, x_hat)?;
    let a = tape.abs(d);
    Ok(tape.mean(a))
}

/// `||X - X_hat||_F / ||X||_F`.
pub fn loss_sc<T: Scalar>(tape: &mut Tape<T>, mag: Var, mag_hat: Var) -> Result<Var> {
    if tape.shape(mag) != tape.shape(mag_hat) {
        return Err(Error::shape("loss_sc", tape.shape(mag), tape.shape(mag_hat)));
    }
    let den = tape.reduce(Reduce::FrobeniusNorm, mag, None)?;
    if tape.value(den).item() == T::zero() {
        return Err(Error::ZeroReference);
    }
    let d = tape.sub(mag, mag_hat)?;
    let num = tape.reduce(Reduce::FrobeniusNorm, d, None)?;
    tape.div(num, den)
}

/// `sum |log(X + floor) - log(X_hat + floor)|`.
pub fn loss_mag<T: Scalar>(tape: &mut Tape<T>, mag: Var, mag_hat: Var) -> Result<Var> {
    if tape.shape(mag) != tape.shape(mag_hat) {
        return Err(Error::LengthMismatch(tape.value(mag).numel(), tape.value(mag_hat).numel()));
    }
    let a = tape.affine(mag, 1.0, LOG_FLOOR);
    let b = tape.affine(mag_hat, 1.0, LOG_FLOOR);
    let (la, lb) = (tape.log(a)?, tape.log(b)?);
    let d = tape.sub(la, lb)?;
    tape.reduce(Reduce::L1Norm, d, None)
}

/// Sum over the resolutions of `sc + mag / T`, `T` the sample count.
/// Returns the node and the per-resolution `(sc, mag)` values.
pub fn loss_freq<T: Scalar>(tape: &mut Tape<T>, x: Var, x_hat: Var) -> Result<(Var, Vec<(f64, f64)>)> {
    let n = check_len(tape, x, x_hat)?;
    if n < min_len() {
        return Err(Error::TooShort { len: n, min: min_len() });
    }
    let mut total: Option<Var> = None;
    let mut parts = Vec::with_capacity(RESOLUTIONS.len());
    for cfg in resolutions() {
        let mx = tape.stft_magnitude(x, cfg)?;
        let mh = tape.stft_magnitude(x_hat, cfg)?;
        let sc = loss_sc(tape, mx, mh)?;
        let mag = loss_mag(tape, mx, mh)?;
        parts.push((tape.value(sc).item().as_f64(), tape.value(mag).item().as_f64()));
        let scaled = tape.scale(mag, 1.0 / n as f64);
        let term = tape.add(sc, scaled)?;
        total = Some(match total {
            Some(t) => tape.add(t, term)?,
            None => term,
        });
    }
    Ok((total.expect("three resolutions"), parts))
}

/// `loss_time + loss_freq` with the per-component values.
pub fn loss_total<T: Scalar>(tape: &mut Tape<T>, x: Var, x_hat: Var) -> Result<LossNodes> {
    let lt = loss_time(tape, x, x_hat)?;
    let (lf, parts) = loss_freq(tape, x, x_hat)?;
    let total = tape.add(lt, lf)?;
    let report = LossReport {
        l_time: tape.value(lt).item().as_f64(),
        l_sc: parts.iter().map(|p| p.0).collect(),
        l_mag: parts.iter().map(|p| p.1).collect(),
        l_freq: tape.value(lf).item().as_f64(),
        total: tape.value(total).item().as_f64(),
    };
    Ok(LossNodes { total, report })
}

/// Loss values for plain slices (no gradients).
pub fn loss_report<T: Scalar>(x: &[T], x_hat: &[T]) -> Result<LossReport> {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::from_vec(x.to_vec()));
    let b = tape.constant(Tensor::from_vec(x_hat.to_vec()));
    Ok(loss_total(&mut tape, a, b)?.report)
}

/// Multi-resolution frequency loss for plain slices.
pub fn loss_freq_value<T: Scalar>(x: &[T], x_hat: &[T]) -> Result<f64> {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::from_vec(x.to_vec()));
    let b = tape.constant(Tensor::from_vec(x_hat.to_vec()));
    let (v, _) = loss_freq(&mut tape, a, b)?;
    Ok(tape.value(v).item().as_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{gradcheck, FD_STEP};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn scalar_op(f: impl Fn(&mut Tape<f64>, Var, Var) -> Result<Var>, a: Vec<f64>, b: Vec<f64>) -> Result<f64> {
        let mut tape = Tape::new();
        let (x, y) = (tape.constant(Tensor::from_vec(a)), tape.constant(Tensor::from_vec(b)));
        let v = f(&mut tape, x, y)?;
        Ok(tape.value(v).item())
    }

    #[test]
    fn time_loss_examples() {
        assert_eq!(scalar_op(loss_time, vec![1.0, 1.0], vec![0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(scalar_op(loss_time, vec![0.3, -2.0], vec![0.3, -2.0]).unwrap(), 0.0);
        assert!(matches!(
            scalar_op(loss_time, vec![1.0], vec![1.0, 2.0]),
            Err(Error::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn spectral_convergence_examples() {
        let x = vec![1.0, 2.0, 0.5, 3.0];
        assert_eq!(scalar_op(loss_sc, x.clone(), x.clone()).unwrap(), 0.0);
        assert_eq!(scalar_op(loss_sc, x.clone(), vec![0.0; 4]).unwrap(), 1.0);
        let twice: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert!((scalar_op(loss_sc, x, twice).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            scalar_op(loss_sc, vec![0.0; 2], vec![1.0; 2]),
            Err(Error::ZeroReference)
        ));
    }

    #[test]
    fn log_magnitude_example() {
        let e = std::f64::consts::E;
        let v = scalar_op(loss_mag, vec![e - LOG_FLOOR], vec![1.0 - LOG_FLOOR]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_signals_give_exact_zero() {
        let x = noise(3000, 1);
        let r = loss_report(&x, &x).unwrap();
        assert_eq!(r.total, 0.0);
        assert_eq!(r.l_sc.len(), 3);
    }

    #[test]
    fn frequency_loss_rejects_short_input() {
        let x = noise(1000, 2);
        assert!(matches!(loss_report(&x, &x), Err(Error::TooShort { min: 1200, .. })));
    }

    #[test]
    fn silent_estimate_gives_unit_convergence_terms() {
        let x = noise(2400, 3);
        let r = loss_report(&x, &vec![0.0; 2400]).unwrap();
        let sc: f64 = r.l_sc.iter().sum();
        assert!((sc - 3.0).abs() < 1e-12);
        assert!(r.total >= r.l_time.max(r.l_freq));
        assert!((r.total - r.l_time - r.l_freq).abs() < 1e-9);
    }

    #[test]
    fn time_loss_gradient() {
        let x = Tensor::from_vec(noise(20, 4));
        let y = Tensor::from_vec(noise(20, 5));
        let r = gradcheck(&[x, y], FD_STEP, |t, v| loss_time(t, v[0], v[1])).unwrap();
        assert!(r.passes(1e-5), "{r:?}");
    }

    #[test]
    fn total_loss_gradient_wrt_estimate() {
        let x = noise(1300, 6);
        let y = Tensor::from_vec(noise(1300, 7));
        let r = gradcheck(&[y], FD_STEP, |t, v| {
            let c = t.constant(Tensor::from_vec(x.clone()));
            Ok(loss_total(t, c, v[0])?.total)
        })
        .unwrap();
        assert!(r.passes(1e-4), "{r:?}");
    }
}
