//! Dense tensors with a recording tape for reverse-mode gradients.
//!
//! The primitive set is deliberately small: exactly what the Fourier and
//! branch-trunk operators need, with explicit shapes and no general
//! broadcasting. Complex tensors are stored as interleaved `(re, im)` pairs.

mod checkpoint;
mod gauss;
mod gemm;
mod gradcheck;
mod params;
pub mod spectral;
mod tape;
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, ModelKind};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use params::{Gradients, ParameterStore};
pub use tape::{gelu_scalar, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("retained modes {modes} out of range for length {n} (max {max})")]
    ModeRange { modes: usize, n: usize, max: usize },
    #[error("target of sample {sample} has zero norm")]
    DegenerateTarget { sample: usize },
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("tape was already consumed by a previous backward pass")]
    StaleTape,
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),
    #[error("checkpoint {0}")]
    Format(#[from] crate::binfmt::FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AutodiffError>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(AutodiffError::Shape(msg.into()))
}
