//! Network layout, shape inference, initialization, forward execution and checkpoints.

mod checkpoint;
mod forward;
mod params;
mod spec;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TrainingMeta, FORMAT_VERSION, MAGIC};
pub use forward::{forward, predict};
pub use params::{init_parameters, Parameters, INIT_VARIANCE};
pub use spec::{edlm_compact_spec, edlm_default_spec, LayerSpec, NetworkSpec, MIN_INPUT_EXTENT};

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input {h}×{w} is too small: both extents must be >= {min}")]
    InputTooSmall { h: usize, w: usize, min: usize },
    #[error("extent underflow at layer {layer}: {detail}")]
    ExtentUnderflow { layer: usize, detail: String },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("input shape {got:?} does not match network input {expected:?}")]
    InputShape { expected: Vec<usize>, got: Vec<usize> },
    #[error("layer {layer}: {source}")]
    Layer { layer: usize, source: TensorError },
    #[error("no parameters for layer {0}")]
    MissingParameters(usize),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint format version {found} is unsupported (this build reads {supported})")]
    VersionUnsupported { found: u8, supported: u8 },
    #[error("checkpoint shapes inconsistent with spec: {0}")]
    ShapeInconsistent(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
