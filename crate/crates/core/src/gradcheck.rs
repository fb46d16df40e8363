//! Central finite-difference gradient checking in 64-bit precision.

use rayon::prelude::*;

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::tensor::Tensor;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Gradients smaller than this times `max(1, |f|)` are compared on an
/// absolute scale: central differences cannot resolve finer detail.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Entries whose relative error exceeds this are re-estimated with the
/// step scaled by each of `RETRY_SCALES`, keeping the closest estimate.
pub const REFINE_ABOVE: f64 = 1e-6;
pub const RETRY_SCALES: [f64; 3] = [10.0, 0.1, 0.01];

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Absolute scale below which differences are not amplified.
    pub floor: f64,
    /// `(input index, element index, analytic, numeric)` of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.checked > 0 && self.max_rel_error < tol
    }
}

pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares reverse-mode gradients of the scalar `f(inputs)` with central
/// differences for every element of every input.
pub fn gradcheck<F>(inputs: &[Tensor<f64>], h: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var> + Sync,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let root = f(&mut tape, &vars)?;
    let floor = REL_ERROR_FLOOR * tape.value(root).item().abs().max(1.0);
    let grads = tape.backward(root)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| match grads.get(v) {
            Some(g) => g.data().to_vec(),
            None => vec![0.0; t.numel()],
        })
        .collect();

    let eval = |inputs: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let root = f(&mut tape, &vars)?;
        Ok(tape.value(root).item())
    };

    let coords: Vec<(usize, usize)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..t.numel()).map(move |j| (i, j)))
        .collect();
    let central = |i: usize, j: usize, h: f64| -> Result<f64> {
        let mut shifted = inputs.to_vec();
        let x0 = inputs[i].data()[j];
        shifted[i].data_mut()[j] = x0 + h;
        let fp = eval(&shifted)?;
        shifted[i].data_mut()[j] = x0 - h;
        let fm = eval(&shifted)?;
        Ok((fp - fm) / (2.0 * h))
    };
    let numeric: Vec<f64> = coords
        .par_iter()
        .map(|&(i, j)| {
            let a = analytic[i][j];
            let mut best = central(i, j, h)?;
            // A piecewise-linear unit within `h` of its kink biases the
            // difference quotient, so shorter steps help there; roundoff
            // dominates for small gradients of a large sum, where a longer
            // step helps.
            for scale in RETRY_SCALES {
                if rel_error(a, best, floor) <= REFINE_ABOVE {
                    break;
                }
                let n = central(i, j, h * scale)?;
                if rel_error(a, n, floor) < rel_error(a, best, floor) {
                    best = n;
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;

    let mut report = GradCheckReport {
        checked: coords.len(),
        floor,
        ..Default::default()
    };
    for (&(i, j), &n) in coords.iter().zip(&numeric) {
        let a = analytic[i][j];
        let e = rel_error(a, n, floor);
        if e > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = e.max(report.max_rel_error);
            report.worst = Some((i, j, a, n));
        }
    }
    Ok(report)
}
