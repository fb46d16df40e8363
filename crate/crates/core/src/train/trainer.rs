use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::autodiff::Tape;
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::model::{forward_on_tape, ModelConfig, ModelParams};
use crate::nn::init_params;
use crate::objective::{loss_total, min_len, LossReport};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::train::adam::{adam_step, cosine_lr, AdamState};
use crate::train::config::TrainConfig;
use crate::train::data::TrainData;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Decoders trained with the fusion block bypassed.
    Warm,
    /// Everything trained jointly.
    Joint,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Warm => "warm",
            Phase::Joint => "joint",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainState<T> {
    /// Number of completed steps.
    pub step: usize,
    pub adam: AdamState<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub phase: Phase,
    pub lr: f64,
    /// Batch mean.
    pub loss: LossReport,
}

pub const METRICS_NAME: &str = "metrics.tsv";
pub const METRICS_HEADER: &str = "step\tphase\tlr\tl_time\tl_freq\ttotal";
pub const FINAL_NAME: &str = "final.hdrs";

pub fn checkpoint_name(step: usize) -> String {
    format!("step_{step:06}.hdrs")
}

#[derive(Clone, Debug)]
pub struct Trainer<T> {
    pub model_cfg: ModelConfig,
    pub train_cfg: TrainConfig,
    pub params: ModelParams<T>,
    pub state: TrainState<T>,
}

fn add_into<T: Scalar>(acc: &mut BTreeMap<String, Tensor<T>>, grads: BTreeMap<String, Tensor<T>>) {
    for (k, g) in grads {
        match acc.get_mut(&k) {
            Some(a) => a.data_mut().iter_mut().zip(g.data()).for_each(|(a, &b)| *a += b),
            None => {
                acc.insert(k, g);
            }
        }
    }
}

impl<T: Scalar> Trainer<T> {
    /// Fresh parameters initialised from the training seed.
    pub fn new(model_cfg: ModelConfig, train_cfg: TrainConfig) -> Result<Self> {
        model_cfg.validate()?;
        train_cfg.validate()?;
        if train_cfg.segment_samples < min_len() {
            return Err(Error::TooShort {
                len: train_cfg.segment_samples,
                min: min_len(),
            });
        }
        let params = init_params(&model_cfg, train_cfg.seed);
        Ok(Self {
            model_cfg,
            train_cfg,
            params,
            state: TrainState::default(),
        })
    }

    pub fn phase_at(&self, step: usize) -> Phase {
        if step < self.train_cfg.warm_phase_steps {
            Phase::Warm
        } else {
            Phase::Joint
        }
    }

    pub fn is_done(&self) -> bool {
        self.state.step >= self.train_cfg.total_steps
    }

    fn item_grads(&self, bypass: bool, target: &[T], input: &[T]) -> Result<(BTreeMap<String, Tensor<T>>, LossReport)> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, |n| !(bypass && n.starts_with("fusion.")));
        let trace = forward_on_tape(&mut tape, &bound, &self.model_cfg, input, bypass)?;
        let x = tape.constant(Tensor::from_vec(target.to_vec()));
        let loss = loss_total(&mut tape, x, trace.x_hat)?;
        if !loss.report.is_finite() {
            return Ok((BTreeMap::new(), loss.report));
        }
        let grads = tape.backward(loss.total)?;
        let mut out = BTreeMap::new();
        for (name, &v) in bound.iter() {
            if let Some(g) = grads.get(v) {
                out.insert(name.clone(), g.clone());
            }
        }
        Ok((out, loss.report))
    }

    /// Runs one optimisation step on the batch the schedule assigns to it.
    pub fn step(&mut self, data: &TrainData<T>) -> Result<StepRecord> {
        let cfg = &self.train_cfg;
        let s = self.state.step;
        if s >= cfg.total_steps {
            return Err(Error::StepOutOfRange {
                step: s,
                total: cfg.total_steps,
            });
        }
        let phase = self.phase_at(s);
        let bypass = phase == Phase::Warm;
        let lr = cosine_lr(s, cfg)?;
        let plan = data.batch_plan(cfg.seed, s, cfg.batch_size, cfg.segment_samples);
        let results: Vec<_> = plan
            .par_iter()
            .map(|&(item, offset)| {
                let c = data.crop(item, offset, cfg.segment_samples);
                self.item_grads(bypass, &c.target, &c.input)
            })
            .collect::<Result<_>>()?;

        let b = results.len() as f64;
        let mut loss = LossReport::default();
        let mut grads = BTreeMap::new();
        for (g, r) in results {
            if !r.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step: s,
                    detail: format!("{r:?}"),
                });
            }
            loss.l_time += r.l_time / b;
            loss.l_freq += r.l_freq / b;
            loss.total += r.total / b;
            if loss.l_sc.is_empty() {
                loss.l_sc = vec![0.0; r.l_sc.len()];
                loss.l_mag = vec![0.0; r.l_mag.len()];
            }
            loss.l_sc.iter_mut().zip(&r.l_sc).for_each(|(a, v)| *a += v / b);
            loss.l_mag.iter_mut().zip(&r.l_mag).for_each(|(a, v)| *a += v / b);
            add_into(&mut grads, g);
        }
        let inv_b = T::of(1.0 / b);
        for g in grads.values_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= inv_b);
        }
        if cfg.grad_clip > 0.0 {
            let norm = grads
                .values()
                .flat_map(|g| g.data().iter().map(|v| v.as_f64() * v.as_f64()))
                .sum::<f64>()
                .sqrt();
            if norm > cfg.grad_clip {
                let c = T::of(cfg.grad_clip / norm);
                grads.values_mut().for_each(|g| g.data_mut().iter_mut().for_each(|v| *v *= c));
            }
        }
        let cfg = self.train_cfg.clone();
        adam_step(&mut self.params, &grads, &mut self.state.adam, lr, &cfg)?;
        self.state.step += 1;
        Ok(StepRecord {
            step: s,
            phase,
            lr,
            loss,
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut meta: Vec<(String, String)> = Vec::new();
        meta.extend(self.model_cfg.to_pairs().into_iter().map(|(k, v)| (format!("model.{k}"), v)));
        meta.extend(self.train_cfg.to_pairs().into_iter().map(|(k, v)| (format!("train.{k}"), v)));
        meta.push(("state.step".into(), self.state.step.to_string()));
        meta.push(("state.phase".into(), self.phase_at(self.state.step).to_string()));
        for (k, t) in &self.state.adam.t {
            meta.push((format!("state.adam_t.{k}"), t.to_string()));
        }
        let mut arrays = BTreeMap::new();
        for (k, t) in self.params.iter() {
            arrays.insert(format!("param.{k}"), t.cast());
        }
        for (k, t) in &self.state.adam.m {
            arrays.insert(format!("adam.m.{k}"), t.cast());
        }
        for (k, t) in &self.state.adam.v {
            arrays.insert(format!("adam.v.{k}"), t.cast());
        }
        Checkpoint { meta, arrays }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let model_cfg = ModelConfig::from_pairs(c.section("model"))?;
        let train_cfg = TrainConfig::from_pairs(c.section("train"))?;
        let params = params_from_checkpoint(c, &model_cfg)?;
        let step: usize = c
            .require("state.step")?
            .parse()
            .map_err(|_| Error::Corrupt("bad state.step".into()))?;
        let mut adam = AdamState::default();
        for (k, v) in c.section("state.adam_t") {
            let t = v.parse().map_err(|_| Error::Corrupt(format!("bad adam step for {k}")))?;
            adam.t.insert(k.to_string(), t);
        }
        for (k, t) in &c.arrays {
            if let Some(n) = k.strip_prefix("adam.m.") {
                adam.m.insert(n.to_string(), t.cast());
            } else if let Some(n) = k.strip_prefix("adam.v.") {
                adam.v.insert(n.to_string(), t.cast());
            }
        }
        Ok(Self {
            model_cfg,
            train_cfg,
            params,
            state: TrainState { step, adam },
        })
    }
}

/// Model configuration and parameters stored in a checkpoint.
pub fn params_from_checkpoint<T: Scalar>(c: &Checkpoint, cfg: &ModelConfig) -> Result<ModelParams<T>> {
    let map = c
        .arrays
        .iter()
        .filter_map(|(k, t)| k.strip_prefix("param.").map(|n| (n.to_string(), t.cast())))
        .collect();
    let params = ModelParams::new(map);
    params.check(cfg)?;
    Ok(params)
}

/// Loads the model configuration and parameters from a checkpoint file.
pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<(ModelConfig, ModelParams<T>)> {
    let c = Checkpoint::load(path)?;
    let cfg = ModelConfig::from_pairs(c.section("model"))?;
    let params = params_from_checkpoint(&c, &cfg)?;
    Ok((cfg, params))
}

fn append_metrics(path: &Path, r: &StepRecord) -> Result<()> {
    let fresh = !path.exists();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut line = String::new();
    if fresh {
        line.push_str(METRICS_HEADER);
        line.push('\n');
    }
    line.push_str(&format!(
        "{}\t{}\t{}\t{}\t{}\t{}\n",
        r.step, r.phase, r.lr, r.loss.l_time, r.loss.l_freq, r.loss.total
    ));
    f.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Trains to `total_steps`, appending to `out_dir/metrics.tsv`, saving
/// periodic checkpoints and `out_dir/final.hdrs`. `on_step` sees every
/// completed step.
pub fn train<T: Scalar>(
    trainer: &mut Trainer<T>,
    data: &TrainData<T>,
    out_dir: &Path,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let metrics = out_dir.join(METRICS_NAME);
    while !trainer.is_done() {
        let r = trainer.step(data)?;
        append_metrics(&metrics, &r)?;
        on_step(&r);
        let every = trainer.train_cfg.checkpoint_every;
        if every > 0 && trainer.state.step.is_multiple_of(every) {
            trainer.to_checkpoint().save(out_dir.join(checkpoint_name(trainer.state.step)))?;
        }
    }
    let fin = out_dir.join(FINAL_NAME);
    trainer.to_checkpoint().save(&fin)?;
    Ok(fin)
}
