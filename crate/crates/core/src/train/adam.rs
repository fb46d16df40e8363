use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::train::config::TrainConfig;

/// Adam moments with a step counter per array, so arrays that join
/// training late get their own bias correction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState<T> {
    pub m: BTreeMap<String, Tensor<T>>,
    pub v: BTreeMap<String, Tensor<T>>,
    pub t: BTreeMap<String, u64>,
}

/// `lr_min + (lr - lr_min) (1 + cos(pi step / total)) / 2`.
pub fn cosine_lr(step: usize, cfg: &TrainConfig) -> Result<f64> {
    if step > cfg.total_steps {
        return Err(Error::StepOutOfRange {
            step,
            total: cfg.total_steps,
        });
    }
    let c = (PI * step as f64 / cfg.total_steps as f64).cos();
    Ok(cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + c))
}

/// One bias-corrected Adam update of every array that has a gradient.
/// Nothing is modified when any gradient is non-finite.
pub fn adam_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &BTreeMap<String, Tensor<T>>,
    state: &mut AdamState<T>,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    for (name, g) in grads {
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient(name.clone()));
        }
        let p = params.get(name)?;
        if p.shape() != g.shape() {
            return Err(Error::shape("adam_step", p.shape(), g.shape()));
        }
    }
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let (one, eps) = (T::one(), T::of(cfg.eps));
    for (name, g) in grads {
        let p = params.get_mut(name)?;
        let m = state.m.entry(name.clone()).or_insert_with(|| Tensor::zeros(g.shape().to_vec()));
        let v = state.v.entry(name.clone()).or_insert_with(|| Tensor::zeros(g.shape().to_vec()));
        let t = state.t.entry(name.clone()).or_insert(0);
        *t += 1;
        let c1 = T::of(1.0 - cfg.beta1.powi(*t as i32));
        let c2 = T::of(1.0 - cfg.beta2.powi(*t as i32));
        let lr = T::of(lr);
        for (((pv, mv), vv), &gv) in p
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g.data())
        {
            *mv = b1 * *mv + (one - b1) * gv;
            *vv = b2 * *vv + (one - b2) * gv * gv;
            let mh = *mv / c1;
            let vh = *vv / c2;
            *pv -= lr * mh / (vh.sqrt() + eps);
        }
    }
    Ok(())
}
