//! Distances, fusion and the two evaluation protocols.

mod aggregate;
mod casia;
mod distance;
mod metrics;

pub use aggregate::{aggregate_external_features, Aggregation};
pub use casia::{casia_b_eval, group_views, is_gallery, CasiaEntry, CasiaReport, ProbeSet, ViewGroups};
pub use distance::{distance_matrix, euclidean, fuse, l2_norm, l2_normalize};
pub use metrics::{
    average_precision, cross_camera_eval, rank_by_distance, GalleryEntry, GallerySet, MetricsReport, QueryResult,
    DEFAULT_RANKS,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("cannot normalise a zero vector")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("ranking has no positive match")]
    NoPositives,
    #[error("no query has a positive match ({excluded} excluded)")]
    NoValidQueries { excluded: usize },
    #[error("cross-camera evaluation needs at least 2 cameras, found {0}")]
    TooFewCameras(usize),
    #[error("no entries for probe view {probe_view} / gallery view {gallery_view}")]
    MissingView { probe_view: u32, gallery_view: u32 },
    #[error("view {0} is not a CASIA-B angle")]
    InvalidView(u32),
    #[error("non-finite feature in {0}")]
    NonFinite(String),
    #[error("empty input")]
    EmptyInput,
    #[error("chunk size must be positive")]
    InvalidChunk,
}
