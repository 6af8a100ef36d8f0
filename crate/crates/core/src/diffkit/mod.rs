//! Minimal dense numeric core: row-major `f64` matrices, multi-layer
//! perceptrons with hand-written reverse-mode gradients, Adam, and the two
//! weight initialisers compared by the ablation matrix.

mod adam;
mod init;
mod matrix;
mod mlp;
mod rng;

pub use adam::{clip_global_norm, AdamState};
pub use init::{init_orthogonal, init_uniform, WeightInit};
pub use matrix::Matrix;
pub use mlp::{Activation, Dense, GradTape, MlpNet, NetGrads};
pub use rng::SeededRng;
