//! Dense `f64` matrices, a tape-based reverse-mode differentiation graph,
//! the named parameter store with Adam, and finite-difference checking.

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::{grad_check, grad_check_floor, grad_check_report, GradCheckReport};
pub use graph::{Gradients, Graph, Var};
pub use params::{clip_global_norm, AdamConfig, Parameters};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("index {index} out of range for {op} (length {len})")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("loss must be a 1x1 scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("unsupported softmax axis {0}")]
    BadAxis(usize),
    #[error("dropout probability must be in [0, 1), got {0}")]
    BadDropout(f64),
    #[error("parameter key mismatch: {0}")]
    KeyMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
