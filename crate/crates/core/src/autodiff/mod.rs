//! Dense-tensor reverse-mode differentiation and the Adam optimizer.

mod adam;
mod checkpoint;
mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{params_from_json, params_to_json, PARAMS_FORMAT, PARAMS_VERSION};
pub use gradcheck::{grad_check, GRAD_CHECK_FLOOR};
pub use graph::{Graph, Var};
pub use params::{Gradients, Params};
pub use tensor::Tensor;
