//! Set-pooled gait embedder.
//!
//! Each frame passes through three convolution stages (5×5, then 3×3, with
//! 2× max pooling between stages). Frame maps are merged by elementwise
//! max over the set, sliced into horizontal pyramid bands, pooled (max +
//! mean) and projected strip by strip. With `branches = 2` a second,
//! set-level pipeline runs on the pooled intermediate maps and contributes
//! its own strip block.

mod checkpoint;
mod config;
mod model;
pub(crate) mod ops;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CheckpointError, CHECKPOINT_MAGIC,
};
pub use config::ModelConfig;
pub use model::{Embedding, ForwardTrace, GaitModel, ParamSpec};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("empty frame set")]
    EmptySet,
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("feature height {height} not divisible by pyramid scale {scale}")]
    IndivisibleHeight { height: usize, scale: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
