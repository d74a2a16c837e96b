//! p×k×c batch sampling, batch-all triplet loss and the Adam training loop
//! with validation-mAP checkpoint selection.

mod adam;
mod config;
mod loss;
mod sampler;
mod train;

pub use adam::Adam;
pub use config::RunFile;
pub use loss::{batch_all_triplet_loss, Averaging, LossConfig, LossOutput};
pub use sampler::{flip_tracklet, sample_batch, sample_frame_indices, BatchSample, BatchSpec, TrainIndex};
pub use train::{
    batch_gradient, history_csv, train, HistoryRow, TrainConfig, TrainOutcome, ValidationSet, ValidationTracklet,
};

use thiserror::Error;

use crate::embedder::EmbedError;
use crate::retrieval::RetrievalError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("config line {line}: {reason}")]
    ConfigLine { line: usize, reason: String },
    #[error("need {needed} identities per batch, dataset has {available}")]
    InsufficientIdentities { needed: usize, available: usize },
    #[error("batch has no valid triplets")]
    NoValidTriplets,
    #[error("{samples} embeddings but {labels} labels")]
    LabelCount { samples: usize, labels: usize },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}
