//! Adam with cosine annealing, the two-phase protocol (decoders first with
//! the fusion block bypassed, then joint training), checkpoints and resume.

mod adam;
mod config;
mod data;
mod trainer;

pub use adam::{adam_step, cosine_lr, AdamState};
pub use config::TrainConfig;
pub use data::{TrainData, TrainItem};
pub use trainer::{
    checkpoint_name, load_model, params_from_checkpoint, train, Phase, StepRecord, TrainState, Trainer,
    FINAL_NAME, METRICS_HEADER, METRICS_NAME,
};
