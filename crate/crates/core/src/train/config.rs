use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub lr_min: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub total_steps: usize,
    /// Steps trained with the fusion block bypassed (fixed weight 1/2).
    pub warm_phase_steps: usize,
    pub batch_size: usize,
    pub segment_samples: usize,
    pub seed: u64,
    /// Save a checkpoint every this many steps; 0 saves only at the end.
    pub checkpoint_every: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            lr_min: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            total_steps: 1000,
            warm_phase_steps: 500,
            batch_size: 4,
            segment_samples: 32_000,
            seed: 0,
            checkpoint_every: 0,
            grad_clip: 0.0,
        }
    }
}

impl TrainConfig {
    /// Sets the warm phase to half of `total_steps`.
    pub fn with_steps(mut self, total_steps: usize) -> Self {
        self.total_steps = total_steps;
        self.warm_phase_steps = total_steps / 2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(0.0..=self.lr).contains(&self.lr_min) {
            return bad("need lr > 0 and 0 <= lr_min <= lr");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return bad("betas must lie in [0, 1) and eps must be positive");
        }
        if self.total_steps == 0 || self.warm_phase_steps >= self.total_steps {
            return bad("need total_steps > 0 and warm_phase_steps < total_steps");
        }
        if self.batch_size == 0 || self.segment_samples == 0 {
            return bad("batch_size and segment_samples must be positive");
        }
        if self.grad_clip.is_nan() || self.grad_clip < 0.0 {
            return bad("grad_clip must be >= 0");
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        [
            ("lr", self.lr.to_string()),
            ("lr_min", self.lr_min.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("eps", self.eps.to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("warm_phase_steps", self.warm_phase_steps.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("segment_samples", self.segment_samples.to_string()),
            ("seed", self.seed.to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
            ("grad_clip", self.grad_clip.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad value `{v}` for train.{key}")))
        }
        match key {
            "lr" => self.lr = num(key, value)?,
            "lr_min" => self.lr_min = num(key, value)?,
            "beta1" => self.beta1 = num(key, value)?,
            "beta2" => self.beta2 = num(key, value)?,
            "eps" => self.eps = num(key, value)?,
            "total_steps" => self.total_steps = num(key, value)?,
            "warm_phase_steps" => self.warm_phase_steps = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "segment_samples" => self.segment_samples = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "grad_clip" => self.grad_clip = num(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key train.{key}"))),
        }
        Ok(())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
