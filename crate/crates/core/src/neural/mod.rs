//! Dense ReLU networks with exact reverse-mode gradients and Adam.
//!
//! Everything is f64. Batches are row-major `batch × features` slices.

mod adam;
mod checkpoint;
mod mlp;

use thiserror::Error;

pub use adam::{adam_step, Adam, Direction};
pub use checkpoint::{from_bytes, load, load_expecting, save, to_bytes};
pub use mlp::{ForwardCache, Gradients, Layer, Mlp, OutputActivation};

/// Hidden widths used by both actor and critics.
pub const HIDDEN: [usize; 2] = [400, 300];

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
