//! The dual-decoder restoration network and its ablations.

mod config;
mod forward;
mod params;

pub use config::{count_by_module, count_params, param_specs, ModelConfig, ParamSpec, Variant};
pub use forward::{
    combine, encode, forward, forward_on_tape, fuse, refinement_decode, suppression_decode, ForwardTrace,
    TapeTrace, STD_FLOOR,
};
pub use params::{BoundParams, ModelParams};
