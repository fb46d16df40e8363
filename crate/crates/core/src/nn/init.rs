use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{param_specs, ModelConfig, ModelParams};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn uniform_fan_in<T: Scalar>(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.random_range(-bound..=bound))).collect();
    Tensor::new(shape.to_vec(), data).expect("shape and data agree")
}

/// Deterministic initialisation of every array in the configured layout.
/// Each array draws from its own stream keyed by name, so variants that
/// share an array also share its initial values.
pub fn init_params<T: Scalar>(cfg: &ModelConfig, seed: u64) -> ModelParams<T> {
    let tensors = param_specs(cfg)
        .into_iter()
        .map(|spec| {
            let t = if spec.fan_in == 0 {
                Tensor::zeros(spec.shape.clone())
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(name_stream(&spec.name));
                uniform_fan_in(&spec.shape, spec.fan_in, &mut rng)
            };
            (spec.name, t)
        })
        .collect::<BTreeMap<_, _>>();
    ModelParams::new(tensors)
}

fn name_stream(name: &str) -> u64 {
    // FNV-1a
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}
