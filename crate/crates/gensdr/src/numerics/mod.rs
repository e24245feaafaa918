//! Minimal dense linear algebra, a ReLU MLP with hand-derived gradients, and
//! the Adam optimizer. This is the only compute substrate in the crate.

mod adam;
mod matrix;
mod mlp;

pub use adam::{adam_step, adam_step_flat, AdamHyper, AdamState};
pub use matrix::Matrix;
pub use mlp::{mlp_init, ForwardCache, Gradients, MlpParams, MlpSpec};
