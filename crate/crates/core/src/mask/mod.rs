//! Body-part label maps to aligned binary gait silhouettes.
//!
//! A frame arrives as a [`LabelMap`] with one of seven part ids per pixel,
//! optionally accompanied by instance masks when several people share the
//! crop. [`compose_silhouette`] selects the requested parts (and gates them
//! by the largest instance), [`compute_alignment`] derives the crop/scale/
//! centre frame from the full-body union, and [`apply_alignment`] maps any
//! grid of the same size into the canonical 64×44 frame.

mod align;
mod grid;
mod labels;
mod tracklet;

pub use align::{apply_alignment, compute_alignment, AlignmentFrame, Silhouette, SIL_HEIGHT, SIL_WIDTH};
pub use grid::BinaryGrid;
pub use labels::{BodyPart, InstanceMaskSet, InstanceSource, LabelMap, PartSubset};
pub use tracklet::{process_torso_subtraction, process_tracklet, DropReason, DroppedFrame, PipelineConfig, TrackletSilhouettes};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("silhouette has no foreground pixels")]
    EmptySilhouette,
    #[error("label {0} out of range 0..=6")]
    InvalidLabel(u8),
    #[error("part subset must be non-empty and exclude background")]
    InvalidPartSubset,
    #[error("empty canvas ({0}x{1})")]
    EmptyCanvas(usize, usize),
    #[error("all {0} frames dropped")]
    AllFramesDropped(usize),
    #[error("tracklet has no frames")]
    EmptyTracklet,
}

/// Binary grid that is 1 where the label belongs to `parts`, gated by the
/// largest instance mask when any are given.
pub fn compose_silhouette(
    map: &LabelMap,
    parts: PartSubset,
    instances: &InstanceMaskSet,
) -> Result<BinaryGrid, MaskError> {
    for m in instances.masks() {
        grid::check_dims(map.dims(), m.dims())?;
    }
    let gate = instances.largest();
    let (w, h) = map.dims();
    let labels = map.labels();
    let grid = BinaryGrid::from_fn(w, h, |x, y| {
        parts.contains(labels[y * w + x]) && gate.is_none_or(|g| g.get(x, y))
    });
    Ok(grid)
}

/// Removes torso pixels from an existing silhouette: `silhouette AND NOT torso`.
pub fn subtract_torso(silhouette: &BinaryGrid, torso_mask: &BinaryGrid) -> Result<BinaryGrid, MaskError> {
    silhouette.and_not(torso_mask)
}
