//! Learnable layers as differentiable tape operations.

pub mod conv;
pub mod glu;
pub mod init;
pub mod lstm;

pub use conv::ConvGeometry;
pub use init::{init_params, uniform_fan_in};
pub use lstm::LstmLayer;
